package util

import (
	"bytes"
	"strings"
	"unicode"
)

// Slug lowercases s and joins its fields with dashes.
func Slug(s string) string {
	return strings.Join(strings.Fields(strings.ToLower(s)), "-")
}
