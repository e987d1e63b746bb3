package sticker

import (
	"context"
	"errors"
	"strconv"

	"example.com/infra/logs"
	"example.com/shipping/sticker_common"
)

func convertThirdPartySticker(ctx context.Context,
	thirdPartySticker *sticker_common.ThirdPartySticker) *sticker_common.StickerItem {
	normalImageWidth, err := strconv.Atoi(thirdPartySticker.NormalImage.Width)
	if err != nil {
		logs.CtxError(ctx, "invalid normalImageWidth", err, "Width", thirdPartySticker.NormalImage.Width)
	}
	normalImageHeight, err := strconv.Atoi(thirdPartySticker.NormalImage.Height)
	if err != nil {
		logs.CtxError(ctx, "invalid normalImageHeight", err, "Height", thirdPartySticker.NormalImage.Height)
	}
	return &sticker_common.StickerItem{
		Width:  int32(normalImageWidth),
		Height: int32(normalImageHeight),
	}
}

func parsePort(s string) (int16, error) {
	port, err := strconv.Atoi(s)
	if err != nil {
		return 0, err
	}
	return int16(port), nil
}

func parseLimits(q map[string]string) (int32, int32) {
	lo, _ := strconv.Atoi(q["lo"])
	hi, _ := strconv.Atoi(q["hi"])
	return int32(lo), int32(hi)
}

// parseCount keeps the full int range and is not reported.
func parseCount(s string) int {
	n, _ := strconv.Atoi(s)
	return n
}
