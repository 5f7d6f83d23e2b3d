#pragma once

#include <set>
#include <string>
#include <vector>

namespace tagmine::rerank {

struct GalleryItem {
    std::string id;
    std::vector<double> embedding;
    std::set<int> tags;
};

std::vector<GalleryItem> load_gallery(const std::string& path);

struct Query {
    std::vector<double> embedding;
    std::set<int> tags;
};

struct ScoredItem {
    std::string id;
    double score = 0.0;
};

// Descending score, ties by ascending id, no duplicates.
using RankedList = std::vector<ScoredItem>;

// Convex blend of cosine similarity and the fraction of query tags the item
// carries: alpha * cos + (1 - alpha) * |query.tags & item.tags| / max(1, |query.tags|).
// Matching tags act as visible alignment evidence on top of the embedding.
double combined_score(const Query& query, const GalleryItem& item, double alpha);

RankedList rerank(const Query& query, const std::vector<GalleryItem>& gallery,
                  double alpha, std::size_t top_k);

// score = |keywords & item.tags| / |keywords|; keywords must be non-empty.
RankedList keyword_search(const std::set<int>& keywords,
                          const std::vector<GalleryItem>& gallery, std::size_t top_k);

}  // namespace tagmine::rerank
