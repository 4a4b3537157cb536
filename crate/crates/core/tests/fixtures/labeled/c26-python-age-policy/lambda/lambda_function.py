from ask_sdk_core.utils import get_slot_value


def launch(handler_input):
    speech = "How old are you?"
    return handler_input.response_builder.speak(speech).ask(speech).response


def age_intent(handler_input):
    age = get_slot_value(handler_input, "age")
    speech = "At " + age + " you have slept for years."
    return handler_input.response_builder.speak(speech).response
