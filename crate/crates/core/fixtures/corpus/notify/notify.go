package notify

import (
	"context"
	"net/http"
	"os"
	"strings"
)

type Notifier struct {
	client *http.Client
	hooks  []string
}

// Broadcast posts body to every registered hook.
func (n *Notifier) Broadcast(ctx context.Context, body string) {
	for _, hook := range n.hooks {
		go n.post(ctx, hook, body)
	}
}

func (n *Notifier) post(ctx context.Context, url, body string) {
	req, err := http.NewRequestWithContext(ctx, http.MethodPost, url, strings.NewReader(body))
	if err != nil {
		return
	}
	resp, err := n.client.Do(req)
	if err == nil {
		resp.Body.Close()
	}
}
