#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tagmine/semparse.hpp"

namespace tagmine::vocab {

enum class TagType { kEntity, kAttribute, kAction };

std::string tag_type_name(TagType type);
TagType tag_type_from_name(const std::string& name);

// Per-type surface-form counts with set semantics per caption: a tag occurring
// twice inside one caption counts once. Merging partial maps is plain addition,
// so shard counts combine associatively and commutatively.
struct FrequencyMaps {
    std::map<std::string, std::uint64_t> entities;
    std::map<std::string, std::uint64_t> attributes;
    std::map<std::string, std::uint64_t> actions;

    void add(const semparse::ParsedTags& tags);
    void merge(const FrequencyMaps& other);
    std::uint64_t total() const;
};

struct VocabEntry {
    int id = 0;
    std::string canonical;
    TagType type = TagType::kEntity;
    std::uint64_t frequency = 0;
    std::vector<std::string> synonyms;  // sorted ascending
};

// The ranked, typed, synonym-merged category system. Ids are dense from 0;
// entries sorted by descending frequency, ties by ascending canonical string.
class TagVocabulary {
public:
    TagVocabulary() = default;
    explicit TagVocabulary(std::vector<VocabEntry> entries);

    const std::vector<VocabEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    // Surface form -> id over canonicals and synonyms, after normalize_tag.
    std::optional<int> lookup(const std::string& surface) const;

    // FNV-1a over the canonical/type listing; binds trained models to the
    // vocabulary they were trained against.
    std::uint64_t hash() const;

    void save_tsv(const std::string& path) const;
    static TagVocabulary load_tsv(const std::string& path);

private:
    std::vector<VocabEntry> entries_;
    std::unordered_map<std::string, int> lookup_;
};

// Surface -> canonical synonym table ("human" -> "person"). Both sides are
// normalized on load.
using SynonymTable = std::map<std::string, std::string>;

SynonymTable load_synonym_table(const std::string& path);

// Allow/deny list: one canonical per line; lines starting with '-' are
// denials. Any allow line restricts the vocabulary to the allowed set.
struct AllowDenyList {
    std::vector<std::string> allowed;
    std::vector<std::string> denied;
};

AllowDenyList load_allow_deny(const std::string& path);

// Folds synonym counts into their canonicals, ranks by total frequency
// (descending, ties by canonical ascending), keeps the top_k entries with
// frequency >= min_freq, then applies the allow/deny filter. Types resolve by
// majority count across the three maps; ties break entity > attribute > action.
TagVocabulary build_vocab(const FrequencyMaps& freqs, std::size_t top_k,
                          const SynonymTable& synonyms = {}, std::uint64_t min_freq = 1,
                          const AllowDenyList& filter = {});

struct OverlapResult {
    std::size_t count = 0;
    std::vector<std::string> canonicals;  // matched, in vocabulary id order
};

// Overlap with an external category list after normalization and synonym
// resolution on both sides. Count is the number of distinct matched canonicals.
OverlapResult vocab_overlap(const TagVocabulary& vocab,
                            const std::vector<std::string>& external);

struct CorpusStats {
    std::uint64_t n_images = 0;
    std::uint64_t n_texts = 0;
    double avg_texts_per_image = 0.0;  // 2 decimals
    std::uint64_t n_tags = 0;          // parsed tag occurrences, per caption
    double avg_tags_per_image = 0.0;   // 2 decimals
};

// Throws UsageError when n_images == 0 (averages undefined).
CorpusStats corpus_stats(const std::vector<std::pair<std::string, semparse::ParsedTags>>&
                             parsed_by_image);

}  // namespace tagmine::vocab
