#include "tagmine/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"

#include "tagmine/errors.hpp"
#include "tagmine/rng.hpp"

namespace tagmine::corpus {

void for_each_record(const std::string& path, Shard shard,
                     const std::function<void(std::size_t, const CaptionRecord&)>& on_record,
                     const std::function<void(const LineError&)>& on_error) {
    if (shard.count == 0 || shard.index >= shard.count)
        throw UsageError("shard index " + std::to_string(shard.index) +
                         " out of range for count " + std::to_string(shard.count));
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open corpus file: " + path);

    std::string line;
    std::size_t line_number = 0;
    for (; std::getline(in, line); ++line_number) {
        if (line_number % shard.count != shard.index) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            on_error({line_number, "not a JSON object"});
            continue;
        }
        if (!obj.contains("image_id") || !obj["image_id"].is_string()) {
            on_error({line_number, "missing string field \"image_id\""});
            continue;
        }
        if (!obj.contains("text") || !obj["text"].is_string()) {
            on_error({line_number, "missing string field \"text\""});
            continue;
        }
        CaptionRecord rec{obj["image_id"].get<std::string>(), obj["text"].get<std::string>()};
        if (rec.image_id.empty()) {
            on_error({line_number, "empty image_id"});
            continue;
        }
        on_record(line_number, rec);
    }
}

StreamResult stream_records(const std::string& path, Shard shard) {
    StreamResult out;
    for_each_record(
        path, shard,
        [&](std::size_t, const CaptionRecord& rec) { out.records.push_back(rec); },
        [&](const LineError& err) { out.errors.push_back(err); });
    return out;
}

std::vector<ImageTagSet> aggregate_image_tags(
    const std::vector<std::pair<std::string, std::vector<int>>>& parsed) {
    std::vector<std::string> order;
    std::map<std::string, std::set<int>> unions;
    for (const auto& [image_id, tags] : parsed) {
        auto [it, inserted] = unions.try_emplace(image_id);
        if (inserted) order.push_back(image_id);
        it->second.insert(tags.begin(), tags.end());
    }
    std::vector<ImageTagSet> out;
    out.reserve(order.size());
    for (const auto& id : order) {
        const auto& s = unions[id];
        out.push_back({id, std::vector<int>(s.begin(), s.end())});
    }
    return out;
}

namespace {
template <typename T>
std::vector<T> fisher_yates(std::vector<T> items, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(items[i - 1], items[j]);
    }
    return items;
}
}  // namespace

std::vector<int> shuffle_tags(std::vector<int> tags, std::uint64_t seed) {
    return fisher_yates(std::move(tags), seed);
}

std::vector<std::string> shuffle_tags(std::vector<std::string> tags, std::uint64_t seed) {
    return fisher_yates(std::move(tags), seed);
}

}  // namespace tagmine::corpus
