#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace tagmine::semparse {

// Heads, modifiers and relations extracted from one caption. Every modifier's
// attached head and every relation endpoint appears in heads. The builtin
// chunker emits strings already in canonical form (see normalize_tag).
struct ParseResult {
    std::vector<std::string> heads;                 // multi-word allowed
    std::vector<std::pair<std::string, std::string>> modifiers;   // (modifier, head)
    std::vector<std::array<std::string, 3>> relations;            // (subject, relation, object)
};

// Normalized tag projections: heads -> entities (object/scene pool),
// modifiers -> attributes, relation words -> actions. Lists lowercase,
// duplicate-free, in order of first occurrence.
struct ParsedTags {
    std::vector<std::string> entities;
    std::vector<std::string> attributes;
    std::vector<std::string> actions;
};

// Canonical form of one tag string: lowercase, surrounding punctuation
// stripped, verb inflections reduced to stem ("running" -> "run"), plural
// nouns singularized ("dogs" -> "dog"). Multi-word phrases are normalized
// word by word; only the final head word is singularized. Idempotent.
std::string normalize_tag(const std::string& raw);

// Deterministic rule-based chunker: closed-class word lists, suffix POS
// heuristics, noun phrases as (modifier* head+), relations from verbs and
// prepositions linking adjacent noun phrases. Total over arbitrary UTF-8;
// worst case returns empty lists.
ParseResult parse_caption(const std::string& text);

ParsedTags project_tags(const ParseResult& parse);

// Pre-computed parses keyed by corpus line number, for the external mode.
// Sidecar format: JSON lines {"line": int, "heads": [...],
// "modifiers": [[modifier, head], ...], "relations": [[subj, rel, obj], ...]}.
class SidecarIndex {
public:
    static SidecarIndex load(const std::string& path);

    // Throws DataError naming the line when no record exists for it.
    const ParseResult& at(std::size_t line_number) const;
    bool contains(std::size_t line_number) const;
    std::size_t size() const { return parses_.size(); }

private:
    std::map<std::size_t, ParseResult> parses_;
    std::string path_;
};

}  // namespace tagmine::semparse
