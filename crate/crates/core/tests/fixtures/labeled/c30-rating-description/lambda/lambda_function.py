def quote(handler_input):
    speech = "Stay hungry, stay foolish."
    return handler_input.response_builder.speak(speech).response
