#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hallguard::ovon {

using Json = nlohmann::ordered_json;

/// Thrown by parse_envelope and friends. `path()` points at the offending
/// location in dotted form ("ovon.events[2].parameters.dialogEvent").
class EnvelopeError : public std::runtime_error {
public:
    EnvelopeError(std::string path, const std::string& what)
        : std::runtime_error(path.empty() ? what : path + ": " + what),
          path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class MalformedJson : public EnvelopeError {
    using EnvelopeError::EnvelopeError;
};

class SchemaViolation : public EnvelopeError {
    using EnvelopeError::EnvelopeError;
};

class WordLimitExceeded : public EnvelopeError {
    using EnvelopeError::EnvelopeError;
};

class MissingEvent : public EnvelopeError {
    using EnvelopeError::EnvelopeError;
};

struct SchemaInfo {
    std::string version;
    std::optional<std::string> url;
    Json extras = Json::object();

    bool operator==(const SchemaInfo&) const = default;
};

struct SenderInfo {
    std::string from;
    std::optional<std::string> reply_to;  // wire key "reply-to"
    Json extras = Json::object();

    bool operator==(const SenderInfo&) const = default;
};

struct Token {
    std::string value;
    Json extras = Json::object();

    bool operator==(const Token&) const = default;
};

struct TextFeature {
    std::string mime_type = "text/plain";
    std::vector<Token> tokens;
    Json extras = Json::object();

    bool operator==(const TextFeature&) const = default;
};

struct DialogEventBody {
    std::string speaker_id;
    std::string span_start;  // preserved verbatim; see validate_envelope
    std::optional<std::string> context;  // whisper-only summary field
    TextFeature text;
    Json span_extras = Json::object();
    Json features_extras = Json::object();
    Json extras = Json::object();

    bool operator==(const DialogEventBody&) const = default;
};

enum class EventType { invite, utterance, whisper };

std::string_view to_string(EventType type);

struct EnvelopeEvent {
    EventType type = EventType::utterance;
    // invite only
    std::string invite_to_url;
    Json invite_to_extras = Json::object();
    // utterance / whisper only
    std::optional<DialogEventBody> dialog;
    Json parameters_extras = Json::object();
    Json extras = Json::object();

    bool operator==(const EnvelopeEvent&) const = default;
};

struct ConversationEnvelope {
    SchemaInfo schema;
    std::string conversation_id;
    SenderInfo sender;
    int response_code = 200;
    std::vector<EnvelopeEvent> events;
    Json conversation_extras = Json::object();
    Json extras = Json::object();       // unknown keys inside "ovon"
    Json root_extras = Json::object();  // unknown siblings of "ovon"

    bool operator==(const ConversationEnvelope&) const = default;
};

/// Number of maximal non-whitespace runs in `t`.
std::size_t count_words(std::string_view t);

ConversationEnvelope parse_envelope(std::string_view raw);
ConversationEnvelope envelope_from_json(const Json& doc);

std::string serialize_envelope(const ConversationEnvelope& env);
Json envelope_to_json(const ConversationEnvelope& env);

enum class Severity { warning, error };

std::string_view to_string(Severity s);

struct Violation {
    std::string path;
    std::string rule;
    Severity severity = Severity::error;

    bool operator==(const Violation&) const = default;
};

/// Schema and word-limit checks. Returns an empty list iff the envelope is
/// clean; never throws.
std::vector<Violation> validate_envelope(const ConversationEnvelope& env);

inline constexpr std::size_t kWhisperContextMaxWords = 30;
inline constexpr std::size_t kWhisperValueMaxWords = 200;

enum class WordLimitMode { strict, lenient };

/// Timestamp source used for dialog-event span start times. Must return the
/// "YYYY-MM-DD HH:MM:SS+00:00" shape; utc_clock() is the production source.
using Clock = std::function<std::string()>;

Clock utc_clock();
std::string format_utc_timestamp(std::int64_t unix_seconds);

struct BuildOptions {
    WordLimitMode mode = WordLimitMode::lenient;
    std::string speaker_id = "humanOrAssistantID";
    std::string invite_url = "https://someurl";
    SchemaInfo schema = default_schema();
    int response_code = 200;

    static SchemaInfo default_schema();
};

struct BuildResult {
    ConversationEnvelope envelope;
    std::vector<std::string> warnings;
};

/// Packs a reviewer reply into an invite + utterance + whisper envelope.
/// Strict mode throws WordLimitExceeded when the whisper context exceeds 30
/// words or the whisper value exceeds 200; lenient mode truncates at the word
/// boundary and records a warning instead.
BuildResult build_review_envelope(std::string_view utterance_text,
                                  std::string_view whisper_context,
                                  std::string_view whisper_value,
                                  std::string conversation_id,
                                  SenderInfo sender,
                                  const Clock& clock,
                                  const BuildOptions& options = {});

struct WhisperContent {
    std::string context;
    std::string value;
};

/// Token values of the utterance event joined with no separator.
/// Throws MissingEvent when the envelope has no utterance.
std::string extract_utterance(const ConversationEnvelope& env);

/// Whisper context plus joined token values. Throws MissingEvent.
WhisperContent extract_whisper(const ConversationEnvelope& env);

}  // namespace hallguard::ovon
