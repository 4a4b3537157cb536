const Alexa = require('ask-sdk-core');

const SaveIntentHandler = {
  canHandle(handlerInput) {
    return Alexa.getRequestType(handlerInput.requestEnvelope) === 'IntentRequest'
      && Alexa.getIntentName(handlerInput.requestEnvelope) === 'SaveIntent';
  },
  async handle(handlerInput) {
    const client = handlerInput.serviceClientFactory.getUpsServiceClient();
    const email = await client.getProfileEmail();
    const attributes = await handlerInput.attributesManager.getPersistentAttributes();
    attributes.email = email;
    handlerInput.attributesManager.setPersistentAttributes(attributes);
    const speakOutput = 'Saved.';
    return handlerInput.responseBuilder.speak(speakOutput).getResponse();
  },
};

exports.handler = Alexa.SkillBuilders.custom()
  .addRequestHandlers(SaveIntentHandler)
  .lambda();
