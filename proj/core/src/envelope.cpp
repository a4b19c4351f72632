#include "hallguard/envelope.hpp"

#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <utility>

namespace hallguard::ovon {

namespace {

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

// Byte offset one past the end of the n-th word, or npos if fewer words.
std::size_t end_of_word(std::string_view t, std::size_t n) {
    std::size_t words = 0;
    std::size_t i = 0;
    while (i < t.size()) {
        while (i < t.size() && is_space(t[i])) ++i;
        if (i >= t.size()) break;
        while (i < t.size() && !is_space(t[i])) ++i;
        if (++words == n) return i;
    }
    return std::string_view::npos;
}

const Json& expect_object(const Json& j, const std::string& path) {
    if (!j.is_object()) throw SchemaViolation(path, "expected an object");
    return j;
}

const Json& expect_member(const Json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaViolation(path + "." + key, "missing required key");
    return *it;
}

std::string expect_string(const Json& j, const std::string& path) {
    if (!j.is_string()) throw SchemaViolation(path, "expected a string");
    return j.get<std::string>();
}

// Collects keys of `obj` not listed in `known`, preserving order.
template <std::size_t N>
Json collect_extras(const Json& obj, const char* const (&known)[N]) {
    Json extras = Json::object();
    for (const auto& [key, value] : obj.items()) {
        bool is_known = false;
        for (const char* k : known) {
            if (key == k) {
                is_known = true;
                break;
            }
        }
        if (!is_known) extras[key] = value;
    }
    return extras;
}

void append_extras(Json& obj, const Json& extras) {
    for (const auto& [key, value] : extras.items()) obj[key] = value;
}

EventType event_type_from_string(const std::string& s, const std::string& path) {
    if (s == "invite") return EventType::invite;
    if (s == "utterance") return EventType::utterance;
    if (s == "whisper") return EventType::whisper;
    throw SchemaViolation(path, "unknown eventType \"" + s + "\"");
}

TextFeature parse_text_feature(const Json& features, const std::string& path) {
    TextFeature feature;
    const Json& text = expect_object(expect_member(features, "text", path), path + ".text");
    if (auto it = text.find("mimeType"); it != text.end())
        feature.mime_type = expect_string(*it, path + ".text.mimeType");
    const Json& tokens = expect_member(text, "tokens", path + ".text");
    if (!tokens.is_array()) throw SchemaViolation(path + ".text.tokens", "expected an array");
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string tok_path = path + ".text.tokens[" + std::to_string(i) + "]";
        const Json& tok = expect_object(tokens[i], tok_path);
        Token token;
        token.value = expect_string(expect_member(tok, "value", tok_path), tok_path + ".value");
        token.extras = collect_extras(tok, {"value"});
        feature.tokens.push_back(std::move(token));
    }
    feature.extras = collect_extras(text, {"mimeType", "tokens"});
    return feature;
}

DialogEventBody parse_dialog_event(const Json& dialog, const std::string& path) {
    DialogEventBody body;
    if (auto it = dialog.find("speakerId"); it != dialog.end())
        body.speaker_id = expect_string(*it, path + ".speakerId");
    if (auto it = dialog.find("span"); it != dialog.end()) {
        const Json& span = expect_object(*it, path + ".span");
        if (auto st = span.find("startTime"); st != span.end())
            body.span_start = expect_string(*st, path + ".span.startTime");
        body.span_extras = collect_extras(span, {"startTime"});
    }
    if (auto it = dialog.find("context"); it != dialog.end())
        body.context = expect_string(*it, path + ".context");
    const Json& features =
        expect_object(expect_member(dialog, "features", path), path + ".features");
    body.text = parse_text_feature(features, path + ".features");
    body.features_extras = collect_extras(features, {"text"});
    body.extras = collect_extras(dialog, {"speakerId", "span", "context", "features"});
    return body;
}

EnvelopeEvent parse_event(const Json& event, const std::string& path) {
    expect_object(event, path);
    EnvelopeEvent result;
    const std::string type_str =
        expect_string(expect_member(event, "eventType", path), path + ".eventType");
    result.type = event_type_from_string(type_str, path + ".eventType");
    const Json& params =
        expect_object(expect_member(event, "parameters", path), path + ".parameters");
    if (result.type == EventType::invite) {
        const Json& to =
            expect_object(expect_member(params, "to", path + ".parameters"), path + ".parameters.to");
        result.invite_to_url =
            expect_string(expect_member(to, "url", path + ".parameters.to"), path + ".parameters.to.url");
        result.invite_to_extras = collect_extras(to, {"url"});
        result.parameters_extras = collect_extras(params, {"to"});
    } else {
        const Json& dialog = expect_object(expect_member(params, "dialogEvent", path + ".parameters"),
                                           path + ".parameters.dialogEvent");
        result.dialog = parse_dialog_event(dialog, path + ".parameters.dialogEvent");
        result.parameters_extras = collect_extras(params, {"dialogEvent"});
    }
    result.extras = collect_extras(event, {"eventType", "parameters"});
    return result;
}

Json text_feature_to_json(const TextFeature& feature) {
    Json text = Json::object();
    text["mimeType"] = feature.mime_type;
    Json tokens = Json::array();
    for (const auto& token : feature.tokens) {
        Json tok = Json::object();
        tok["value"] = token.value;
        append_extras(tok, token.extras);
        tokens.push_back(std::move(tok));
    }
    text["tokens"] = std::move(tokens);
    append_extras(text, feature.extras);
    return text;
}

Json dialog_event_to_json(const DialogEventBody& body) {
    Json dialog = Json::object();
    if (!body.speaker_id.empty()) dialog["speakerId"] = body.speaker_id;
    if (!body.span_start.empty() || !body.span_extras.empty()) {
        Json span = Json::object();
        if (!body.span_start.empty()) span["startTime"] = body.span_start;
        append_extras(span, body.span_extras);
        dialog["span"] = std::move(span);
    }
    if (body.context) dialog["context"] = *body.context;
    Json features = Json::object();
    features["text"] = text_feature_to_json(body.text);
    append_extras(features, body.features_extras);
    dialog["features"] = std::move(features);
    append_extras(dialog, body.extras);
    return dialog;
}

Json event_to_json(const EnvelopeEvent& event) {
    Json out = Json::object();
    out["eventType"] = std::string(to_string(event.type));
    Json params = Json::object();
    if (event.type == EventType::invite) {
        Json to = Json::object();
        to["url"] = event.invite_to_url;
        append_extras(to, event.invite_to_extras);
        params["to"] = std::move(to);
    } else if (event.dialog) {
        params["dialogEvent"] = dialog_event_to_json(*event.dialog);
    }
    append_extras(params, event.parameters_extras);
    out["parameters"] = std::move(params);
    append_extras(out, event.extras);
    return out;
}

bool looks_like_timestamp(std::string_view s) {
    // "YYYY-MM-DD HH:MM:SS" prefix; trailing offset text is accepted verbatim.
    if (s.size() < 19) return false;
    static constexpr std::string_view shape = "dddd-dd-dd dd:dd:dd";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        const char c = s[i];
        switch (shape[i]) {
            case 'd':
                if (std::isdigit(static_cast<unsigned char>(c)) == 0) return false;
                break;
            case ' ':
                if (c != ' ' && c != 'T') return false;
                break;
            default:
                if (c != shape[i]) return false;
        }
    }
    return true;
}

const EnvelopeEvent* find_event(const ConversationEnvelope& env, EventType type) {
    for (const auto& event : env.events)
        if (event.type == type) return &event;
    return nullptr;
}

std::string join_tokens(const EnvelopeEvent& event) {
    std::string out;
    if (event.dialog)
        for (const auto& token : event.dialog->text.tokens) out += token.value;
    return out;
}

}  // namespace

std::string_view to_string(EventType type) {
    switch (type) {
        case EventType::invite: return "invite";
        case EventType::utterance: return "utterance";
        case EventType::whisper: return "whisper";
    }
    return "unknown";
}

std::string_view to_string(Severity s) {
    return s == Severity::error ? "error" : "warning";
}

std::size_t count_words(std::string_view t) {
    std::size_t words = 0;
    bool in_word = false;
    for (char c : t) {
        if (is_space(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++words;
        }
    }
    return words;
}

ConversationEnvelope parse_envelope(std::string_view raw) {
    Json doc;
    try {
        doc = Json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedJson("", e.what());
    }
    return envelope_from_json(doc);
}

ConversationEnvelope envelope_from_json(const Json& doc) {
    expect_object(doc, "");
    const Json& ovon = expect_object(expect_member(doc, "ovon", ""), "ovon");

    ConversationEnvelope env;
    env.root_extras = collect_extras(doc, {"ovon"});

    const Json& schema = expect_object(expect_member(ovon, "schema", "ovon"), "ovon.schema");
    env.schema.version =
        expect_string(expect_member(schema, "version", "ovon.schema"), "ovon.schema.version");
    if (auto it = schema.find("url"); it != schema.end())
        env.schema.url = expect_string(*it, "ovon.schema.url");
    env.schema.extras = collect_extras(schema, {"version", "url"});

    const Json& conversation =
        expect_object(expect_member(ovon, "conversation", "ovon"), "ovon.conversation");
    env.conversation_id = expect_string(expect_member(conversation, "id", "ovon.conversation"),
                                        "ovon.conversation.id");
    env.conversation_extras = collect_extras(conversation, {"id"});

    const Json& sender = expect_object(expect_member(ovon, "sender", "ovon"), "ovon.sender");
    env.sender.from =
        expect_string(expect_member(sender, "from", "ovon.sender"), "ovon.sender.from");
    if (auto it = sender.find("reply-to"); it != sender.end())
        env.sender.reply_to = expect_string(*it, "ovon.sender.reply-to");
    env.sender.extras = collect_extras(sender, {"from", "reply-to"});

    const Json& response_code = expect_member(ovon, "responseCode", "ovon");
    if (!response_code.is_number_integer())
        throw SchemaViolation("ovon.responseCode", "expected an integer");
    env.response_code = response_code.get<int>();

    const Json& events = expect_member(ovon, "events", "ovon");
    if (!events.is_array()) throw SchemaViolation("ovon.events", "expected an array");
    for (std::size_t i = 0; i < events.size(); ++i)
        env.events.push_back(parse_event(events[i], "ovon.events[" + std::to_string(i) + "]"));

    env.extras = collect_extras(ovon, {"schema", "conversation", "sender", "responseCode", "events"});
    return env;
}

Json envelope_to_json(const ConversationEnvelope& env) {
    Json schema = Json::object();
    schema["version"] = env.schema.version;
    if (env.schema.url) schema["url"] = *env.schema.url;
    append_extras(schema, env.schema.extras);

    Json conversation = Json::object();
    conversation["id"] = env.conversation_id;
    append_extras(conversation, env.conversation_extras);

    Json sender = Json::object();
    sender["from"] = env.sender.from;
    if (env.sender.reply_to) sender["reply-to"] = *env.sender.reply_to;
    append_extras(sender, env.sender.extras);

    Json events = Json::array();
    for (const auto& event : env.events) events.push_back(event_to_json(event));

    Json ovon = Json::object();
    ovon["schema"] = std::move(schema);
    ovon["conversation"] = std::move(conversation);
    ovon["sender"] = std::move(sender);
    ovon["responseCode"] = env.response_code;
    ovon["events"] = std::move(events);
    append_extras(ovon, env.extras);

    Json doc = Json::object();
    doc["ovon"] = std::move(ovon);
    append_extras(doc, env.root_extras);
    return doc;
}

std::string serialize_envelope(const ConversationEnvelope& env) {
    return envelope_to_json(env).dump(2) + "\n";
}

std::vector<Violation> validate_envelope(const ConversationEnvelope& env) {
    std::vector<Violation> violations;
    auto add = [&](std::string path, std::string rule, Severity severity) {
        violations.push_back({std::move(path), std::move(rule), severity});
    };

    if (env.schema.version.empty()) add("schema.version", "non-empty", Severity::error);
    if (env.conversation_id.empty()) add("conversation.id", "non-empty", Severity::error);
    if (env.sender.from.empty()) add("sender.from", "non-empty", Severity::error);
    if (env.response_code < 100 || env.response_code > 599)
        add("responseCode", "range-100-599", Severity::error);

    std::size_t utterances = 0;
    std::size_t whispers = 0;
    for (std::size_t i = 0; i < env.events.size(); ++i) {
        const EnvelopeEvent& event = env.events[i];
        const std::string base = "events[" + std::to_string(i) + "]." +
                                 std::string(to_string(event.type));
        if (event.type == EventType::invite) continue;
        if (event.type == EventType::utterance) ++utterances;
        if (event.type == EventType::whisper) ++whispers;
        if (!event.dialog) {
            add(base, "dialog-event-required", Severity::error);
            continue;
        }
        const DialogEventBody& dialog = *event.dialog;
        if (dialog.text.tokens.empty()) add(base + ".tokens", "tokens-non-empty", Severity::error);
        if (!looks_like_timestamp(dialog.span_start))
            add(base + ".span.startTime", "timestamp-shape", Severity::warning);
        if (event.type == EventType::whisper) {
            if (count_words(dialog.context.value_or("")) > kWhisperContextMaxWords)
                add(base + ".context", "word-limit-30", Severity::error);
            if (count_words(join_tokens(event)) > kWhisperValueMaxWords)
                add(base + ".value", "word-limit-200", Severity::error);
        } else if (dialog.context) {
            add(base + ".context", "context-whisper-only", Severity::warning);
        }
    }
    if (utterances == 0) add("events", "utterance-required", Severity::error);
    if (utterances > 1) add("events", "utterance-at-most-one", Severity::error);
    if (whispers > 1) add("events", "whisper-at-most-one", Severity::error);
    return violations;
}

std::string format_utc_timestamp(std::int64_t unix_seconds) {
    std::time_t t = static_cast<std::time_t>(unix_seconds);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d+00:00", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

Clock utc_clock() {
    return [] {
        const auto now = std::chrono::system_clock::now();
        return format_utc_timestamp(
            std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count());
    };
}

SchemaInfo BuildOptions::default_schema() {
    return {"0.9.3", "https://openvoicenetwork.org/schema/dialog-envelope.json", Json::object()};
}

BuildResult build_review_envelope(std::string_view utterance_text,
                                  std::string_view whisper_context,
                                  std::string_view whisper_value,
                                  std::string conversation_id,
                                  SenderInfo sender,
                                  const Clock& clock,
                                  const BuildOptions& options) {
    if (utterance_text.empty())
        throw std::invalid_argument("build_review_envelope: utterance_text must be non-empty");

    BuildResult result;
    auto clamp = [&](std::string_view text, std::size_t limit,
                     const char* field) -> std::string {
        const std::size_t words = count_words(text);
        if (words <= limit) return std::string(text);
        if (options.mode == WordLimitMode::strict)
            throw WordLimitExceeded(std::string("whisper.") + field,
                                    std::to_string(words) + " words exceed the limit of " +
                                        std::to_string(limit));
        result.warnings.push_back(std::string("whisper ") + field + " truncated from " +
                                  std::to_string(words) + " to " + std::to_string(limit) +
                                  " words");
        return std::string(text.substr(0, end_of_word(text, limit)));
    };
    const std::string context = clamp(whisper_context, kWhisperContextMaxWords, "context");
    const std::string value = clamp(whisper_value, kWhisperValueMaxWords, "value");
    const std::string timestamp = clock ? clock() : utc_clock()();

    ConversationEnvelope& env = result.envelope;
    env.schema = options.schema;
    env.conversation_id = std::move(conversation_id);
    env.sender = std::move(sender);
    env.response_code = options.response_code;

    EnvelopeEvent invite;
    invite.type = EventType::invite;
    invite.invite_to_url = options.invite_url;
    env.events.push_back(std::move(invite));

    auto make_dialog_event = [&](EventType type, std::optional<std::string> ctx,
                                 std::string token_value) {
        EnvelopeEvent event;
        event.type = type;
        DialogEventBody dialog;
        dialog.speaker_id = options.speaker_id;
        dialog.span_start = timestamp;
        dialog.context = std::move(ctx);
        dialog.text.tokens.push_back({std::move(token_value), Json::object()});
        event.dialog = std::move(dialog);
        return event;
    };
    env.events.push_back(
        make_dialog_event(EventType::utterance, std::nullopt, std::string(utterance_text)));
    env.events.push_back(make_dialog_event(EventType::whisper, context, value));
    return result;
}

std::string extract_utterance(const ConversationEnvelope& env) {
    const EnvelopeEvent* event = find_event(env, EventType::utterance);
    if (!event) throw MissingEvent("events", "no utterance event");
    return join_tokens(*event);
}

WhisperContent extract_whisper(const ConversationEnvelope& env) {
    const EnvelopeEvent* event = find_event(env, EventType::whisper);
    if (!event) throw MissingEvent("events", "no whisper event");
    WhisperContent content;
    if (event->dialog && event->dialog->context) content.context = *event->dialog->context;
    content.value = join_tokens(*event);
    return content;
}

}  // namespace hallguard::ovon
