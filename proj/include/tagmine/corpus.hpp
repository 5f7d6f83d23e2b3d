#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace tagmine::corpus {

// One image-id/text pair. Several records may share an image_id (one line per
// caption); text may be empty and then simply parses to no tags.
struct CaptionRecord {
    std::string image_id;
    std::string text;
};

// Per-image union of tag ids over all of the image's captions.
// Ids are sorted ascending and duplicate-free.
struct ImageTagSet {
    std::string image_id;
    std::vector<int> tags;
};

struct LineError {
    std::size_t line_number = 0;  // zero-based, matching shard arithmetic
    std::string message;
};

struct Shard {
    std::size_t index = 0;
    std::size_t count = 1;
};

// Streams a JSON-lines corpus file, visiting exactly the lines whose
// line_number % shard.count == shard.index, in file order. Malformed lines go
// to on_error with their line number and the stream continues; an unreadable
// file or an out-of-range shard throws.
void for_each_record(const std::string& path, Shard shard,
                     const std::function<void(std::size_t line_number, const CaptionRecord&)>& on_record,
                     const std::function<void(const LineError&)>& on_error);

struct StreamResult {
    std::vector<CaptionRecord> records;
    std::vector<LineError> errors;
};

StreamResult stream_records(const std::string& path, Shard shard = {});

// Union of tag sets grouped by image_id; one output per distinct image, in
// order of first appearance. Order-insensitive in the set contents.
std::vector<ImageTagSet> aggregate_image_tags(
    const std::vector<std::pair<std::string, std::vector<int>>>& parsed);

// Fisher-Yates with mt19937_64(seed); uniform over permutations, identical
// output across platforms for a fixed seed.
std::vector<int> shuffle_tags(std::vector<int> tags, std::uint64_t seed);
std::vector<std::string> shuffle_tags(std::vector<std::string> tags, std::uint64_t seed);

}  // namespace tagmine::corpus
