package sched

import (
	"context"
	"time"

	"example.com/infra/logs"
)

// SchedulerImpl drives periodic work.
type SchedulerImpl struct {
	interval time.Duration
	ticker   *time.Ticker
	jobs     chan Job
}

// Job is a unit of scheduled work.
type Job func(ctx context.Context) error

// Start begins the scheduler's main loop.
func (s *SchedulerImpl) Start(ctx context.Context) {
	s.ticker = time.NewTicker(s.interval)
	go s.run(ctx)
	logs.CtxInfo(ctx, "Scheduler started with interval: %v", s.interval)
}

func (s *SchedulerImpl) run(ctx context.Context) {
	for {
		select {
		case <-ctx.Done():
			return
		case <-s.ticker.C:
			s.dispatch(ctx)
		}
	}
}

func (s *SchedulerImpl) dispatch(ctx context.Context) {
	for job := range s.jobs {
		go job(ctx)
	}
}

// Watch forwards ticks until the ticker stops.
func (s *SchedulerImpl) Watch(ctx context.Context, out chan<- time.Time) {
	go func() {
		for t := range s.ticker.C {
			out <- t
		}
	}()
}

// Guarded already recovers inside its goroutine.
func (s *SchedulerImpl) Guarded(ctx context.Context) {
	go func() {
		defer func() {
			if r := recover(); r != nil {
				logs.CtxError(ctx, "recovered: %v", r)
			}
		}()
		s.run(ctx)
	}()
}
