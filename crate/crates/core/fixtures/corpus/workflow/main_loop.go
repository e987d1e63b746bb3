package workflow

import (
	"context"

	"example.com/infra/logs"
	"example.com/shipping/task"
	"golang.org/x/sync/errgroup"
)

// MainLoop loads the IDL cache and starts the worker pool.
func MainLoop(ctx context.Context, workers int) error {
	var err error
	errg, ctx := errgroup.WithContext(ctx)
	errg.Go(func() error {
		if err = task.InitIDL(ctx); err != nil {
			return err
		}
		return nil
	})
	pool, ctx := errgroup.WithContext(ctx)
	for i := 0; i < workers; i++ {
		id := i
		pool.Go(func() error {
			return task.Work(ctx, id)
		})
	}
	logs.CtxInfo(ctx, "main loop started with %d workers", workers)
	if err := errg.Wait(); err != nil {
		return err
	}
	return pool.Wait()
}
