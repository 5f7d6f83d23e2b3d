#include "tagmine/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "tagmine/errors.hpp"

namespace tagmine::vocab {

std::string tag_type_name(TagType type) {
    switch (type) {
        case TagType::kEntity: return "entity";
        case TagType::kAttribute: return "attribute";
        case TagType::kAction: return "action";
    }
    return "entity";
}

TagType tag_type_from_name(const std::string& name) {
    if (name == "entity") return TagType::kEntity;
    if (name == "attribute") return TagType::kAttribute;
    if (name == "action") return TagType::kAction;
    throw DataError("unknown tag type: " + name);
}

void FrequencyMaps::add(const semparse::ParsedTags& tags) {
    for (const auto& t : tags.entities) ++entities[t];
    for (const auto& t : tags.attributes) ++attributes[t];
    for (const auto& t : tags.actions) ++actions[t];
}

void FrequencyMaps::merge(const FrequencyMaps& other) {
    for (const auto& [k, v] : other.entities) entities[k] += v;
    for (const auto& [k, v] : other.attributes) attributes[k] += v;
    for (const auto& [k, v] : other.actions) actions[k] += v;
}

std::uint64_t FrequencyMaps::total() const {
    std::uint64_t sum = 0;
    for (const auto& [k, v] : entities) sum += v;
    for (const auto& [k, v] : attributes) sum += v;
    for (const auto& [k, v] : actions) sum += v;
    return sum;
}

TagVocabulary::TagVocabulary(std::vector<VocabEntry> entries) : entries_(std::move(entries)) {
    // canonicals first so a synonym can never shadow another entry's
    // canonical surface (possible with cyclic synonym tables)
    for (const auto& e : entries_) lookup_.emplace(e.canonical, e.id);
    for (const auto& e : entries_)
        for (const auto& s : e.synonyms) lookup_.emplace(s, e.id);
}

std::optional<int> TagVocabulary::lookup(const std::string& surface) const {
    auto it = lookup_.find(semparse::normalize_tag(surface));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

std::uint64_t TagVocabulary::hash() const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
    };
    for (const auto& e : entries_) {
        mix(e.canonical);
        mix("\t");
        mix(tag_type_name(e.type));
        mix("\n");
    }
    return h;
}

namespace {

std::string join_synonyms(const std::vector<std::string>& synonyms) {
    std::string out;
    for (const auto& s : synonyms) {
        if (!out.empty()) out.push_back(',');
        out += s;
    }
    return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    parts.push_back(current);
    return parts;
}

}  // namespace

void TagVocabulary::save_tsv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write vocabulary file: " + path);
    out << "id\tcanonical\ttype\tfrequency\tsynonyms\n";
    for (const auto& e : entries_) {
        auto check = [&](const std::string& s) {
            if (s.find_first_of("\t,\n") != std::string::npos)
                throw DataError("tag \"" + s + "\" cannot be written to TSV");
        };
        check(e.canonical);
        for (const auto& s : e.synonyms) check(s);
        out << e.id << '\t' << e.canonical << '\t' << tag_type_name(e.type) << '\t'
            << e.frequency << '\t' << join_synonyms(e.synonyms) << '\n';
    }
    if (!out) throw DataError("failed writing vocabulary file: " + path);
}

TagVocabulary TagVocabulary::load_tsv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open vocabulary file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty vocabulary file");
    std::vector<VocabEntry> entries;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) { ++line_no; continue; }
        auto cols = split(line, '\t');
        if (cols.size() != 5)
            throw DataError(path + ":" + std::to_string(line_no) + ": expected 5 columns");
        VocabEntry e;
        try {
            e.id = std::stoi(cols[0]);
            e.frequency = std::stoull(cols[3]);
        } catch (const std::exception&) {
            throw DataError(path + ":" + std::to_string(line_no) + ": bad numeric column");
        }
        e.canonical = cols[1];
        e.type = tag_type_from_name(cols[2]);
        if (!cols[4].empty()) e.synonyms = split(cols[4], ',');
        entries.push_back(std::move(e));
        ++line_no;
    }
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].id != static_cast<int>(i))
            throw DataError(path + ": ids not dense from 0");
    return TagVocabulary(std::move(entries));
}

SynonymTable load_synonym_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open synonym table: " + path);
    SynonymTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) { ++line_no; continue; }
        auto cols = split(line, '\t');
        if (cols.size() != 2)
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": expected surface\\tcanonical");
        table[semparse::normalize_tag(cols[0])] = semparse::normalize_tag(cols[1]);
        ++line_no;
    }
    return table;
}

AllowDenyList load_allow_deny(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open allow/deny list: " + path);
    AllowDenyList list;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '-') {
            list.denied.push_back(semparse::normalize_tag(line.substr(1)));
        } else {
            list.allowed.push_back(semparse::normalize_tag(line));
        }
    }
    return list;
}

TagVocabulary build_vocab(const FrequencyMaps& freqs, std::size_t top_k,
                          const SynonymTable& synonyms, std::uint64_t min_freq,
                          const AllowDenyList& filter) {
    if (top_k < 1) throw UsageError("top_k must be >= 1");

    // canonical -> per-type counts + synonym surfaces folded into it
    struct Folded {
        std::uint64_t by_type[3] = {0, 0, 0};
        std::set<std::string> synonyms;
        std::uint64_t total() const { return by_type[0] + by_type[1] + by_type[2]; }
    };
    std::map<std::string, Folded> folded;
    auto resolve = [&](const std::string& surface) -> std::string {
        auto it = synonyms.find(surface);
        return it == synonyms.end() ? surface : it->second;
    };
    auto fold_map = [&](const std::map<std::string, std::uint64_t>& counts, int type_index) {
        for (const auto& [surface, count] : counts) {
            std::string canonical = resolve(surface);
            Folded& f = folded[canonical];
            f.by_type[type_index] += count;
            if (canonical != surface) f.synonyms.insert(surface);
        }
    };
    fold_map(freqs.entities, 0);
    fold_map(freqs.attributes, 1);
    fold_map(freqs.actions, 2);

    std::vector<VocabEntry> ranked;
    ranked.reserve(folded.size());
    for (const auto& [canonical, f] : folded) {
        if (f.total() < min_freq) continue;
        VocabEntry e;
        e.canonical = canonical;
        e.frequency = f.total();
        // majority type; ties break entity > attribute > action
        int best = 0;
        for (int t = 1; t < 3; ++t)
            if (f.by_type[t] > f.by_type[best]) best = t;
        e.type = static_cast<TagType>(best);
        e.synonyms.assign(f.synonyms.begin(), f.synonyms.end());
        ranked.push_back(std::move(e));
    }
    std::sort(ranked.begin(), ranked.end(), [](const VocabEntry& a, const VocabEntry& b) {
        if (a.frequency != b.frequency) return a.frequency > b.frequency;
        return a.canonical < b.canonical;
    });
    if (ranked.size() > top_k) ranked.resize(top_k);

    if (!filter.allowed.empty() || !filter.denied.empty()) {
        std::set<std::string> allowed(filter.allowed.begin(), filter.allowed.end());
        std::set<std::string> denied(filter.denied.begin(), filter.denied.end());
        std::vector<VocabEntry> kept;
        for (auto& e : ranked) {
            if (denied.count(e.canonical)) continue;
            if (!allowed.empty() && !allowed.count(e.canonical)) continue;
            kept.push_back(std::move(e));
        }
        ranked = std::move(kept);
    }

    for (std::size_t i = 0; i < ranked.size(); ++i) ranked[i].id = static_cast<int>(i);
    return TagVocabulary(std::move(ranked));
}

OverlapResult vocab_overlap(const TagVocabulary& vocab,
                            const std::vector<std::string>& external) {
    std::set<int> matched;
    for (const auto& raw : external) {
        auto id = vocab.lookup(raw);
        if (id) matched.insert(*id);
    }
    OverlapResult out;
    out.count = matched.size();
    for (int id : matched) out.canonicals.push_back(vocab.entries()[id].canonical);
    return out;
}

CorpusStats corpus_stats(
    const std::vector<std::pair<std::string, semparse::ParsedTags>>& parsed_by_image) {
    CorpusStats stats;
    std::set<std::string> images;
    for (const auto& [image_id, tags] : parsed_by_image) {
        images.insert(image_id);
        ++stats.n_texts;
        stats.n_tags += tags.entities.size() + tags.attributes.size() + tags.actions.size();
    }
    stats.n_images = images.size();
    if (stats.n_images == 0) throw UsageError("corpus_stats: no images (averages undefined)");
    auto round2 = [](double x) { return std::round(x * 100.0) / 100.0; };
    stats.avg_texts_per_image =
        round2(static_cast<double>(stats.n_texts) / static_cast<double>(stats.n_images));
    stats.avg_tags_per_image =
        round2(static_cast<double>(stats.n_tags) / static_cast<double>(stats.n_images));
    return stats;
}

}  // namespace tagmine::vocab
