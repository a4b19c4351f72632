#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hallguard::kpi {

/// One response's four hallucination KPI values. All are non-negative;
/// density KPIs are per 100 words, so values above 1 are legitimate.
struct KpiRecord {
    double fcd = 0.0;
    double fgr = 0.0;
    double fdf = 0.0;
    double ecs = 0.0;

    bool operator==(const KpiRecord&) const = default;
};

/// Toggles for what counts as a claim marker in the FCD heuristic.
struct FcdMarkers {
    bool numeric_tokens = true;
    bool date_tokens = true;
    bool proper_noun_pairs = true;

    bool operator==(const FcdMarkers&) const = default;
};

class LexiconError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Phrase lists used by the deterministic scorers. Phrases are stored
/// lowercase and deduplicated; multiword phrases match across single spaces.
struct Lexicon {
    std::vector<std::string> fgr_phrases;
    std::vector<std::string> fdf_terms;
    std::vector<std::string> ecs_phrases;
    FcdMarkers fcd_markers;

    static Lexicon defaults();

    /// Loads the plain-text format: one phrase per line, `[fgr]` / `[fdf]` /
    /// `[ecs]` section headers, `#` comments. Throws LexiconError.
    static Lexicon load(const std::filesystem::path& path);

    /// Lowercases, trims, deduplicates and drops empty phrases in place.
    void normalize();
};

/// Raw case-insensitive word-boundary match count of `phrase` in `t`.
std::size_t count_phrase_matches(std::string_view t, std::string_view phrase);

/// Sum of count_phrase_matches over a phrase list.
std::size_t count_list_matches(std::string_view t, const std::vector<std::string>& phrases);

/// Fictional-disclaimer mentions per 100 words; 0 for empty text.
double score_fdf(std::string_view t, const Lexicon& lex);

/// Explicit-contextualization points per 100 words; 0 for empty text.
double score_ecs(std::string_view t, const Lexicon& lex);

/// Grounding-reference score. Raw occurrence count by definition; the
/// normalize flag (pipeline default) scales per 100 words so the value is
/// comparable with the other KPIs.
double score_fgr(std::string_view t, const Lexicon& lex, bool normalize = true);

/// Heuristic factual-claim density: declarative sentences that carry a claim
/// marker and no fictional-disclaimer term, per 100 words.
double score_fcd(std::string_view t, const Lexicon& lex);

struct ScoreOptions {
    bool normalize_fgr = true;
};

KpiRecord score_all(std::string_view t, const Lexicon& lex, const ScoreOptions& opts = {});

class JudgeParseError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class NoJsonFound : public JudgeParseError {
    using JudgeParseError::JudgeParseError;
};

class NonNumericKpi : public JudgeParseError {
    using JudgeParseError::JudgeParseError;
};

struct JudgeParse {
    /// Agent name -> record. A reply that is a single flat KPI object parses
    /// to one record under the empty key.
    std::map<std::string, KpiRecord> records;
    std::vector<std::string> warnings;
};

/// Extracts the first JSON object from an LLM judge reply, tolerating code
/// fences and Python-style single-quoted keys. Missing KPI keys default to 0
/// with a warning. Throws NoJsonFound / NonNumericKpi.
JudgeParse parse_judge_output(std::string_view raw);

}  // namespace hallguard::kpi
