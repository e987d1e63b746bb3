package fsm

import (
	"errors"
	"strings"
)

type Transition struct {
	From, To string
}

func parseTransition(raw interface{}) (Transition, error) {
	t := raw.(Transition)
	if t.From == t.To {
		return Transition{}, errors.New("self transition")
	}
	return t, nil
}

func targetOf(raw interface{}) string {
	tr := raw.(*Transition)
	return tr.To
}
