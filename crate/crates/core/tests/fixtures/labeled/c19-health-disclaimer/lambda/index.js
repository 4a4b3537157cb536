const Alexa = require('ask-sdk-core');

const TipIntentHandler = {
  canHandle(handlerInput) {
    return Alexa.getRequestType(handlerInput.requestEnvelope) === 'IntentRequest'
      && Alexa.getIntentName(handlerInput.requestEnvelope) === 'TipIntent';
  },
  handle(handlerInput) {
    const speakOutput = 'Keep a regular bedtime.';
    return handlerInput.responseBuilder.speak(speakOutput).getResponse();
  },
};

exports.handler = Alexa.SkillBuilders.custom()
  .addRequestHandlers(TipIntentHandler)
  .lambda();
