const Alexa = require('ask-sdk-core');

const TipIntentHandler = {
  canHandle(handlerInput) {
    return Alexa.getRequestType(handlerInput.requestEnvelope) === 'IntentRequest'
      && Alexa.getIntentName(handlerInput.requestEnvelope) === 'TipIntent';
  },
  handle(handlerInput) {
    const speakOutput = 'Walk after lunch.';
    return handlerInput.responseBuilder.speak(speakOutput).getResponse();
  },
};

exports.handler = Alexa.SkillBuilders.custom()
  .addRequestHandlers(TipIntentHandler)
  .lambda();
