package task

import (
	"context"
	"errors"
	"sync"
)

var (
	idlOnce sync.Once
	idlErr  error
)

// InitIDL loads interface definitions once per process.
func InitIDL(ctx context.Context) error {
	idlOnce.Do(func() {
		if ctx.Err() != nil {
			idlErr = errors.New("context cancelled before IDL load")
		}
	})
	return idlErr
}

// Work blocks until the context ends.
func Work(ctx context.Context, id int) error {
	<-ctx.Done()
	return nil
}
