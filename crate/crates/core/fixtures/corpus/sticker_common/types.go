package sticker_common

type Image struct {
	Width  string
	Height string
}

type ThirdPartySticker struct {
	NormalImage Image
}

type StickerItem struct {
	Width  int32
	Height int32
}
