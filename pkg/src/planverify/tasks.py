"""Clean reference plans for common household tasks.

These seed the synthetic corpus generator; each is treated as error-free.
"""

from __future__ import annotations

TASKS: dict[str, tuple[str, list[str]]] = {
    "make_coffee": ("Make coffee", [
        "Driver.PickUp('Mug')",
        "Driver.Place('Sink', 'Mug')",
        "Driver.ToggleOn('Faucet')",
        "Driver.ToggleOff('Faucet')",
        "Driver.PickUp('Mug')",
        "Driver.Place('CoffeeMachine', 'Mug')",
        "Driver.ToggleOn('CoffeeMachine')",
    ]),
    "make_toast": ("Make a slice of toast", [
        "Driver.PickUp('Knife')",
        "Driver.Slice('Bread')",
        "Driver.Place('CounterTop', 'Knife')",
        "Driver.PickUp('BreadSliced')",
        "Driver.Place('Toaster', 'BreadSliced')",
        "Driver.ToggleOn('Toaster')",
        "Driver.ToggleOff('Toaster')",
        "Driver.PickUp('BreadSliced')",
        "Driver.Place('Plate', 'BreadSliced')",
    ]),
    "boil_potato": ("Boil a potato", [
        "Driver.PickUp('Pot')",
        "Driver.Place('Sink', 'Pot')",
        "Driver.ToggleOn('Faucet')",
        "Driver.ToggleOff('Faucet')",
        "Driver.PickUp('Pot')",
        "Driver.Place('StoveBurner', 'Pot')",
        "Driver.PickUp('Potato')",
        "Driver.Place('Pot', 'Potato')",
        "Driver.ToggleOn('StoveKnob')",
    ]),
    "water_plant": ("Water the plant", [
        "Driver.Move(2)",
        "Driver.PickUp('Cup')",
        "Driver.Place('Sink', 'Cup')",
        "Driver.ToggleOn('Faucet')",
        "Driver.ToggleOff('Faucet')",
        "Driver.PickUp('Cup')",
        "Driver.Turn(90)",
        "Driver.Pour('HousePlant', 'Cup')",
    ]),
    "clean_mug": ("Clean all the mugs", [
        "Driver.PickUp('Mug')",
        "Driver.Place('Sink', 'Mug')",
        "Driver.ToggleOn('Faucet')",
        "Driver.ToggleOff('Faucet')",
        "Driver.PickUp('Mug')",
        "Driver.Place('CounterTop', 'Mug')",
    ]),
    "make_salad": ("Make a salad", [
        "Driver.PickUp('Knife')",
        "Driver.Slice('Lettuce')",
        "Driver.Slice('Tomato')",
        "Driver.Place('CounterTop', 'Knife')",
        "Driver.PickUp('LettuceSliced')",
        "Driver.Place('Plate', 'LettuceSliced')",
        "Driver.PickUp('TomatoSliced')",
        "Driver.Place('Plate', 'TomatoSliced')",
    ]),
    "make_sandwich": ("Make a sandwich", [
        "Driver.PickUp('Knife')",
        "Driver.Slice('Bread')",
        "Driver.Slice('Lettuce')",
        "Driver.Place('CounterTop', 'Knife')",
        "Driver.PickUp('BreadSliced')",
        "Driver.Place('Plate', 'BreadSliced')",
        "Driver.PickUp('LettuceSliced')",
        "Driver.Place('Plate', 'LettuceSliced')",
    ]),
    "cook_potato": ("Cook a slice of potato", [
        "Driver.PickUp('Knife')",
        "Driver.Slice('Potato')",
        "Driver.Place('CounterTop', 'Knife')",
        "Driver.PickUp('PotatoSliced')",
        "Driver.Open('Microwave')",
        "Driver.Place('Microwave', 'PotatoSliced')",
        "Driver.Close('Microwave')",
        "Driver.ToggleOn('Microwave')",
        "Driver.ToggleOff('Microwave')",
        "Driver.Open('Microwave')",
        "Driver.PickUp('PotatoSliced')",
        "Driver.Place('Plate', 'PotatoSliced')",
    ]),
    "serve_apple": ("Serve a slice of apple on a plate", [
        "Driver.PickUp('Knife')",
        "Driver.Slice('Apple')",
        "Driver.Place('CounterTop', 'Knife')",
        "Driver.PickUp('AppleSliced')",
        "Driver.Place('Plate', 'AppleSliced')",
    ]),
    "put_remotes": ("Put all remote controls on one sofa", [
        "Driver.Move(3)",
        "Driver.PickUp('RemoteControl')",
        "Driver.Turn(-90)",
        "Driver.Move(1.5)",
        "Driver.Place('Sofa', 'RemoteControl')",
    ]),
    "clean_bathroom": ("Clean the bathroom", [
        "Driver.PickUp('Sponge')",
        "Driver.Place('Sink', 'Sponge')",
        "Driver.ToggleOn('Faucet')",
        "Driver.ToggleOff('Faucet')",
        "Driver.PickUp('Sponge')",
        "Driver.Place('Bathtub', 'Sponge')",
    ]),
    "set_table": ("Set dinner table", [
        "Driver.PickUp('Plate')",
        "Driver.Place('DiningTable', 'Plate')",
        "Driver.PickUp('Fork')",
        "Driver.Place('DiningTable', 'Fork')",
        "Driver.PickUp('Cup')",
        "Driver.Place('DiningTable', 'Cup')",
    ]),
    "tidy_newspapers": ("Put all newspapers on one table", [
        "Driver.PickUp('Newspaper')",
        "Driver.Move(4)",
        "Driver.Place('SideTable', 'Newspaper')",
    ]),
    "boil_water": ("Boil water in the kettle", [
        "Driver.PickUp('Kettle')",
        "Driver.Place('Sink', 'Kettle')",
        "Driver.ToggleOn('Faucet')",
        "Driver.ToggleOff('Faucet')",
        "Driver.PickUp('Kettle')",
        "Driver.Place('StoveBurner', 'Kettle')",
        "Driver.ToggleOn('StoveKnob')",
    ]),
    "cook_egg": ("Cook an egg", [
        "Driver.PickUp('Pan')",
        "Driver.Place('StoveBurner', 'Pan')",
        "Driver.PickUp('Egg')",
        "Driver.Place('Pan', 'Egg')",
        "Driver.ToggleOn('StoveKnob')",
        "Driver.ToggleOff('StoveKnob')",
    ]),
}

# Objects that no template touches; irrelevant pickups draw from here.
DISTRACTORS: tuple[str, ...] = (
    "RemoteControl",
    "Pillow",
    "Book",
    "CreditCard",
    "KeyChain",
    "Watch",
    "CellPhone",
    "Statue",
    "Vase",
    "TissueBox",
    "Candle",
    "AlarmClock",
)
