use super::*;
use crate::rules::RuleSet;

pub(crate) const NAME_EMAIL_JS: &str = r#"const LaunchRequestHandler = {
  handle(handlerInput){
    const speakOutput = 'Hello! What is your name?'; // Ask for user name
    return handlerInput.responseBuilder.speak(speakOutput).reprompt(speakOutput).getResponse();
},};
const CaptureUserNameHandler = {
  handle(handlerInput){
    const userName = handlerInput.requestEnvelope.request.intent.slots.name.value;          // Get name from slot
    const sessionAttributes = handlerInput.attributesManager.getSessionAttributes();
    sessionAttributes.name = userName; // Store name in database
    const speakOutput = 'Thanks ${userName}';
    return handlerInput.responseBuilder.speak(speakOutput).reprompt(speakOutput).getResponse();       // Use name for response
},};
const EmailIntentHandler = {
  async handle(handlerInput){
    const { serviceClientFactory, responseBuilder } = handlerInput;
    const upsServiceClient = serviceClientFactory.getUpsServiceClient();
    const profileEmail = await upsServiceClient.getProfileEmail();  // Get email from permission
    const speechResponse='Your email is ${profileEmail}';
    return handlerInput.responseBuilder.speak(speechResponse).reprompt(speechResponse).getResponse();  // Use email for response
},};
"#;

fn extract(path: &str, dialect: Dialect, text: &str) -> BackendModel {
    let unit = SourceUnit::new(path, dialect, text);
    extract_backend_model(&[unit], &RuleSet::default().patterns)
}

fn js(text: &str) -> BackendModel {
    extract("index.js", Dialect::JsStyle, text)
}

fn py(text: &str) -> BackendModel {
    extract("lambda_function.py", Dialect::PyStyle, text)
}

fn calls_of(m: &BackendModel, kind: ApiKind) -> Vec<&ApiCall> {
    m.api_calls.iter().filter(|c| c.kind == kind).collect()
}

#[test]
fn name_email_handlers() {
    let m = js(NAME_EMAIL_JS);
    let names: Vec<_> = m.units[0].handlers.iter().map(|h| h.name.as_str()).collect();
    assert_eq!(names, ["LaunchRequestHandler", "CaptureUserNameHandler", "EmailIntentHandler"]);
    assert_eq!(m.units[0].handlers[2].intent_name_guess, "EmailIntent");
    assert!(m.diagnostics.is_empty(), "{:?}", m.diagnostics);
}

#[test]
fn name_email_first_output_and_assignment() {
    let m = js(NAME_EMAIL_JS);
    let o = &m.outputs[0];
    assert_eq!(o.text, "Hello! What is your name?");
    assert!(o.holes.is_empty());
    assert_eq!((o.location.line, o.location.column), (3, 25));
    assert_eq!(o.handler.as_deref(), Some("LaunchRequestHandler"));
    let a = m.assignments.iter().find(|a| a.location.line == 3).unwrap();
    assert_eq!(a.lhs, "speakOutput");
    assert!(a.rhs_vars.is_empty());
}

#[test]
fn name_email_slot_access() {
    let m = js(NAME_EMAIL_JS);
    let slots = calls_of(&m, ApiKind::SlotAccess);
    assert_eq!(slots.len(), 1);
    assert_eq!(slots[0].bound_variable.as_deref(), Some("userName"));
    assert_eq!(slots[0].slot_name.as_deref(), Some("name"));
    assert!(slots[0].callee_path.ends_with("slots.name.value"));
}

#[test]
fn name_email_permission_db_and_response() {
    let m = js(NAME_EMAIL_JS);
    let perm = calls_of(&m, ApiKind::PermissionClient);
    assert_eq!(perm.len(), 1);
    assert_eq!(perm[0].bound_variable.as_deref(), Some("profileEmail"));
    assert_eq!(perm[0].category.as_ref().unwrap().as_str(), "Email");

    let db = calls_of(&m, ApiKind::DbSink);
    assert_eq!(db.len(), 1);
    assert_eq!(db[0].argument_vars.iter().collect::<Vec<_>>(), ["userName"]);

    let resp = calls_of(&m, ApiKind::ResponseSink);
    assert_eq!(resp.len(), 3, "one sink per builder chain");
    assert!(resp.iter().any(|r| r.argument_vars.contains("speechResponse")));

    let thanks = m.outputs.iter().find(|o| o.text.starts_with("Thanks")).unwrap();
    assert_eq!(thanks.text, "Thanks ⟨userName⟩");
    assert_eq!(thanks.holes, ["userName"]);
    let a = m.assignments.iter().find(|a| a.lhs == "speechResponse").unwrap();
    assert_eq!(a.rhs_vars.iter().collect::<Vec<_>>(), ["profileEmail"]);
    // destructuring binds both names
    assert!(m.assignments.iter().any(|a| a.lhs == "responseBuilder" && a.rhs_vars.contains("handlerInput")));
}

#[test]
fn py_concatenation() {
    let m = py("x = \"a\" + name + \"!\"\n");
    assert_eq!(m.outputs.len(), 1);
    assert_eq!(m.outputs[0].text, "a⟨name⟩!");
    assert_eq!(m.outputs[0].holes, ["name"]);
    assert_eq!(m.assignments[0].lhs, "x");
    assert_eq!(m.assignments[0].rhs_vars.iter().collect::<Vec<_>>(), ["name"]);
}

#[test]
fn py_format_styles() {
    let m = py("a = 'Hi %s, you are %d' % (name, age)\nb = 'Hi {}'.format(name)\nc = f'Hi {user.name}'\nd = 'Hi {n}'.format(n=nick)\n");
    let texts: Vec<_> = m.outputs.iter().map(|o| o.text.as_str()).collect();
    assert_eq!(texts, ["Hi ⟨name⟩, you are ⟨age⟩", "Hi ⟨name⟩", "Hi ⟨user.name⟩", "Hi ⟨nick⟩"]);
    assert_eq!(m.outputs[2].holes, ["user"]);
    for o in &m.outputs {
        assert_eq!(o.hole_count(), o.holes.len());
    }
}

#[test]
fn py_complex_format_args_keep_text() {
    let m = py("a = 'Hi {}'.format(get_name(x))\n");
    assert_eq!(m.outputs[0].text, "Hi {}");
    assert_eq!(m.diagnostics.len(), 1);
}

#[test]
fn py_docstrings_and_comments_are_not_outputs() {
    let src = "class HelloHandler(AbstractRequestHandler):\n    \"\"\"What is your name?\"\"\"\n    def handle(self, handler_input):\n        # 'what is your age?'\n        speech = \"Hi there\"\n        return handler_input.response_builder.speak(speech).response\n";
    let m = py(src);
    let texts: Vec<_> = m.outputs.iter().map(|o| o.text.as_str()).collect();
    assert_eq!(texts, ["Hi there"]);
    assert_eq!(m.units[0].handlers.len(), 1);
    assert_eq!(m.outputs[0].handler.as_deref(), Some("HelloHandler"));
    assert_eq!(calls_of(&m, ApiKind::ResponseSink).len(), 1);
}

#[test]
fn py_slot_getter_and_intent_guess() {
    let src = "@sb.request_handler(can_handle_func=is_intent_name(\"MyNameIsIntent\"))\ndef my_name_handler(handler_input):\n    name = get_slot_value(handler_input=handler_input, slot_name=\"firstName\")\n    handler_input.attributes_manager.session_attributes[\"name\"] = name\n    return handler_input.response_builder.speak(f\"Hello {name}\").response\n";
    let m = py(src);
    let h = &m.units[0].handlers[0];
    assert_eq!(h.name, "my_name_handler");
    assert_eq!(h.intent_name_guess, "MyNameIsIntent");
    let getter = calls_of(&m, ApiKind::SlotGetter);
    assert_eq!(getter.len(), 1);
    assert_eq!(getter[0].slot_name.as_deref(), Some("firstName"));
    assert_eq!(getter[0].bound_variable.as_deref(), Some("name"));
    let db = calls_of(&m, ApiKind::DbSink);
    assert_eq!(db.len(), 1);
    assert!(db[0].argument_vars.contains("name"));
    assert!(calls_of(&m, ApiKind::ResponseSink)[0].argument_vars.contains("name"));
}

#[test]
fn inline_source_gets_anonymous_variable() {
    let src = "const H = { handle(handlerInput) {\n  return handlerInput.responseBuilder.speak(Alexa.getSlotValue(handlerInput.requestEnvelope, 'city')).getResponse();\n} };";
    let m = js(src);
    let g = calls_of(&m, ApiKind::SlotGetter)[0];
    assert!(g.anonymous);
    let var = g.bound_variable.clone().unwrap();
    assert!(calls_of(&m, ApiKind::ResponseSink)[0].argument_vars.contains(&var));
}

#[test]
fn endpoint_literal_is_permission_source() {
    let src = "async function getAddress(handlerInput) {\n  const url = apiEndpoint + '/v1/devices/' + deviceId + '/settings/address';\n  const response = await axios.get(url, { headers });\n  return response.data;\n}";
    let m = js(src);
    let ep = calls_of(&m, ApiKind::PermissionEndpoint);
    assert_eq!(ep.len(), 1);
    assert_eq!(ep[0].category.as_ref().unwrap().as_str(), "Address");
    assert_eq!(ep[0].bound_variable.as_deref(), Some("url"));
    let http = calls_of(&m, ApiKind::HttpFetch);
    assert_eq!(http.len(), 1);
    assert_eq!(http[0].bound_variable.as_deref(), Some("response"));
    assert!(m.assignments.iter().any(|a| a.lhs == "response" && a.rhs_vars.contains("url")));
}

#[test]
fn account_endpoint_template_literal() {
    let m = js("const u = `${apiEndpoint}/v2/accounts/~current/settings/Profile.name`;");
    let ep = calls_of(&m, ApiKind::PermissionEndpoint);
    assert_eq!(ep[0].category.as_ref().unwrap().as_str(), "Name");
}

#[test]
fn multiline_chain_and_concatenation() {
    let src = "const H = { handle(handlerInput) {\n  const s = 'Nice to meet you, ' +\n    userName +\n    '.';\n  return handlerInput.responseBuilder\n    .speak(s)\n    .getResponse();\n} };";
    let m = js(src);
    assert_eq!(m.outputs.len(), 1);
    assert_eq!(m.outputs[0].text, "Nice to meet you, ⟨userName⟩.");
    assert_eq!(calls_of(&m, ApiKind::ResponseSink).len(), 1);
}

#[test]
fn v1_emit_and_attributes() {
    let src = "const handlers = {\n  'MyNameIsIntent': function () {\n    const name = this.event.request.intent.slots.firstName.value;\n    this.attributes['name'] = name;\n    this.emit(':tell', 'Hello ' + name);\n  },\n};";
    let m = js(src);
    assert_eq!(m.units[0].handlers.len(), 1);
    assert_eq!(m.units[0].handlers[0].intent_name_guess, "MyNameIsIntent");
    assert_eq!(calls_of(&m, ApiKind::SlotAccess)[0].slot_name.as_deref(), Some("firstName"));
    assert_eq!(calls_of(&m, ApiKind::DbSink).len(), 1);
    let sink = calls_of(&m, ApiKind::ResponseSink)[0];
    assert!(sink.argument_vars.contains("name"));
    // the emit event name is not an output, the spoken text is
    assert!(m.outputs.iter().any(|o| o.text == "Hello ⟨name⟩"));
}

#[test]
fn slots_alias() {
    let src = "const H = { handle(handlerInput) {\n  const slots = handlerInput.requestEnvelope.request.intent.slots;\n  const city = slots.city.value;\n} };";
    let m = js(src);
    let s = calls_of(&m, ApiKind::SlotAccess);
    assert_eq!(s.len(), 2);
    let city = s.iter().find(|c| c.slot_name.as_deref() == Some("city")).unwrap();
    assert_eq!(city.bound_variable.as_deref(), Some("city"));
}

#[test]
fn unknown_calls_are_recorded() {
    let src = "const H = { handle(handlerInput) {\n  const n = handlerInput.requestEnvelope.request.intent.slots.name.value;\n  bookingApi.reserve(n, 2);\n  console.log(n);\n} };";
    let m = js(src);
    assert_eq!(m.calls.len(), 1);
    assert_eq!(m.calls[0].callee_path, "bookingApi.reserve");
}

#[test]
fn module_specifiers_and_keys_are_not_outputs() {
    let m = js("const Alexa = require('ask-sdk-core');\nconst x = { 'key': 'value', other: slots['name'] };");
    let texts: Vec<_> = m.outputs.iter().map(|o| o.text.as_str()).collect();
    assert_eq!(texts, ["value"]);
}

#[test]
fn bad_unit_is_skipped_with_one_diagnostic() {
    let good = SourceUnit::new("a.js", Dialect::JsStyle, "const a = 'hi';");
    let bad = SourceUnit::new("b.js", Dialect::JsStyle, "const a = 'unterminated;");
    let m = extract_backend_model(&[bad, good], &RuleSet::default().patterns);
    assert_eq!(m.units.len(), 1);
    assert_eq!(m.diagnostics.len(), 1);
    assert_eq!(m.outputs.len(), 1);
}

#[test]
fn comment_stripping_is_transparent() {
    let with = "const a = 'x'; // 'y'\n/* 'z' */ const b = \"w\";";
    let without = "const a = 'x';           \n          const b = \"w\";";
    let a: Vec<_> = js(with).outputs.into_iter().map(|o| o.text).collect();
    let b: Vec<_> = js(without).outputs.into_iter().map(|o| o.text).collect();
    assert_eq!(a, b);
}
