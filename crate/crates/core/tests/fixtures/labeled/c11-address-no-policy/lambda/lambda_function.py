import requests


def handle_address(handler_input):
    device_id = handler_input.request_envelope.context.system.device.device_id
    api_endpoint = handler_input.request_envelope.context.system.api_endpoint
    url = api_endpoint + "/v1/devices/" + device_id + "/settings/address"
    address = requests.get(url).json()
    speech = "You are at " + address
    return handler_input.response_builder.speak(speech).response
