#include "tagmine/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "tagmine/errors.hpp"

namespace tagmine::rerank {

std::vector<GalleryItem> load_gallery(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open gallery file: " + path);
    std::vector<GalleryItem> items;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    for (; std::getline(in, line); ++line_no) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string where = path + ":" + std::to_string(line_no);
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object() || !obj.contains("id") ||
            !obj["id"].is_string() || !obj.contains("vector") || !obj["vector"].is_array())
            throw DataError(where + ": expected {\"id\", \"vector\", \"tags\"}");
        GalleryItem item;
        item.id = obj["id"].get<std::string>();
        for (const auto& v : obj["vector"]) {
            if (!v.is_number()) throw DataError(where + ": non-numeric vector entry");
            double x = v.get<double>();
            if (!std::isfinite(x)) throw DataError(where + ": non-finite vector entry");
            item.embedding.push_back(x);
        }
        if (obj.contains("tags")) {
            if (!obj["tags"].is_array()) throw DataError(where + ": \"tags\" not an array");
            for (const auto& t : obj["tags"]) {
                if (!t.is_number_integer()) throw DataError(where + ": non-integer tag id");
                item.tags.insert(t.get<int>());
            }
        }
        if (items.empty()) dim = item.embedding.size();
        else if (item.embedding.size() != dim)
            throw DataError(where + ": inconsistent embedding dimension");
        if (!seen.insert(item.id).second)
            throw DataError(where + ": duplicate gallery id \"" + item.id + "\"");
        items.push_back(std::move(item));
    }
    return items;
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw UsageError("combined_score: dimension mismatch");
    double dot = 0.0, norm_a = 0.0, norm_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        norm_a += a[i] * a[i];
        norm_b += b[i] * b[i];
    }
    if (norm_a == 0.0 || norm_b == 0.0)
        throw UsageError("combined_score: zero-norm embedding");
    return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

double overlap_fraction(const std::set<int>& query_tags, const std::set<int>& item_tags) {
    if (query_tags.empty()) return 0.0;
    std::size_t shared = 0;
    for (int t : query_tags) shared += item_tags.count(t);
    return static_cast<double>(shared) / static_cast<double>(query_tags.size());
}

RankedList take_top(std::vector<ScoredItem> scored, std::size_t top_k) {
    std::sort(scored.begin(), scored.end(), [](const ScoredItem& a, const ScoredItem& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    if (scored.size() > top_k) scored.resize(top_k);
    return scored;
}

}  // namespace

double combined_score(const Query& query, const GalleryItem& item, double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw UsageError("alpha must be in [0, 1]");
    double overlap = overlap_fraction(query.tags, item.tags);
    // tag-only scoring for queries that carry no embedding at all; a supplied
    // embedding is validated even when its weight is zero
    if (query.embedding.empty() && alpha == 0.0) return overlap;
    return alpha * cosine(query.embedding, item.embedding) + (1.0 - alpha) * overlap;
}

RankedList rerank(const Query& query, const std::vector<GalleryItem>& gallery,
                  double alpha, std::size_t top_k) {
    if (top_k < 1) throw UsageError("rerank: top_k must be >= 1");
    std::vector<ScoredItem> scored;
    scored.reserve(gallery.size());
    for (const auto& item : gallery)
        scored.push_back({item.id, combined_score(query, item, alpha)});
    return take_top(std::move(scored), top_k);
}

RankedList keyword_search(const std::set<int>& keywords,
                          const std::vector<GalleryItem>& gallery, std::size_t top_k) {
    if (keywords.empty()) throw UsageError("keyword_search: empty keyword set");
    if (top_k < 1) throw UsageError("keyword_search: top_k must be >= 1");
    std::vector<ScoredItem> scored;
    scored.reserve(gallery.size());
    for (const auto& item : gallery) {
        std::size_t shared = 0;
        for (int t : keywords) shared += item.tags.count(t);
        scored.push_back(
            {item.id, static_cast<double>(shared) / static_cast<double>(keywords.size())});
    }
    return take_top(std::move(scored), top_k);
}

}  // namespace tagmine::rerank
