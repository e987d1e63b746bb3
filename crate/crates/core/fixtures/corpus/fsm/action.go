package fsm

import (
	"context"
	"fmt"

	"example.com/infra/logger"
)

// EventContext is the payload handed to every action.
type EventContext interface{}

type Shipment struct {
	ID     string
	Weight int
}

type ShipmentContext struct {
	Shipment *Shipment
}

type ReturnContext struct {
	Reason string
}

type FMReturnShipmentCollectionAllocatedAction struct{}

func (a *FMReturnShipmentCollectionAllocatedAction) Execute(eventCtx EventContext) error {
	shipmentCtx := eventCtx.(ShipmentContext)
	shipment := shipmentCtx.Shipment
	logger.WithContext(context.Background()).Infof(
		"Executing FMReturnShipmentCollectionAllocatedAction: %v, %v",
		shipmentCtx, shipment.ID)
	return nil
}

type ReturnReasonAction struct{}

func (a *ReturnReasonAction) Execute(eventCtx EventContext) error {
	returnCtx := eventCtx.(*ReturnContext)
	if returnCtx.Reason == "" {
		return fmt.Errorf("empty return reason")
	}
	return nil
}

// weightOf extracts the parcel weight.
func weightOf(eventCtx EventContext) (int, bool) {
	sc := eventCtx.(ShipmentContext)
	return sc.Shipment.Weight, true
}

// weightIfShipment uses the checked form and is not reported.
func weightIfShipment(eventCtx EventContext) int {
	if sc, ok := eventCtx.(ShipmentContext); ok {
		return sc.Shipment.Weight
	}
	return 0
}

func describe(v interface{}) string {
	s := v.(fmt.Stringer)
	return s.String()
}

func mustShipment(payload map[string]interface{}) *Shipment {
	raw := payload["shipment"]
	shipment := raw.(*Shipment)
	return shipment
}
