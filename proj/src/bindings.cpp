// Python bindings for the main operations: parsing, projection, the loss
// kernels, metrics and reranking. Matrices cross the boundary as nested lists
// of floats, which is plenty at desk scale.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tagmine/corpus.hpp"
#include "tagmine/evalkit.hpp"
#include "tagmine/losskit.hpp"
#include "tagmine/rerank.hpp"
#include "tagmine/semparse.hpp"
#include "tagmine/tagger.hpp"
#include "tagmine/vocab.hpp"

namespace py = pybind11;

namespace {

using Rows = std::vector<std::vector<double>>;

tagmine::Matrix to_matrix(const Rows& rows, const char* what) {
    if (rows.empty()) throw tagmine::UsageError(std::string(what) + ": empty matrix");
    tagmine::Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols)
            throw tagmine::UsageError(std::string(what) + ": ragged rows");
        for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = rows[r][c];
    }
    return m;
}

Rows from_matrix(const tagmine::Matrix& m) {
    Rows rows(m.rows, std::vector<double>(m.cols));
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) rows[r][c] = m(r, c);
    return rows;
}

py::dict parse_dict(const tagmine::semparse::ParseResult& parse) {
    py::dict out;
    out["heads"] = parse.heads;
    py::list modifiers;
    for (const auto& [m, h] : parse.modifiers) modifiers.append(py::make_tuple(m, h));
    out["modifiers"] = modifiers;
    py::list relations;
    for (const auto& r : parse.relations)
        relations.append(py::make_tuple(r[0], r[1], r[2]));
    out["relations"] = relations;
    return out;
}

}  // namespace

PYBIND11_MODULE(_tagmine, m) {
    m.doc() = "corpus-to-tags toolkit core";
    m.attr("IGNORE") = tagmine::losskit::kIgnoreLabel;
    m.attr("PAD") = tagmine::losskit::kPadToken;

    py::register_exception<tagmine::UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<tagmine::DataError>(m, "DataError", PyExc_RuntimeError);

    m.def("normalize_tag", &tagmine::semparse::normalize_tag, py::arg("raw"));
    m.def(
        "parse_caption",
        [](const std::string& text) {
            return parse_dict(tagmine::semparse::parse_caption(text));
        },
        py::arg("text"));
    m.def(
        "caption_tags",
        [](const std::string& text) {
            auto tags =
                tagmine::semparse::project_tags(tagmine::semparse::parse_caption(text));
            py::dict out;
            out["entities"] = tags.entities;
            out["attributes"] = tags.attributes;
            out["actions"] = tags.actions;
            return out;
        },
        py::arg("text"), "parse a caption and project it onto tag types");

    m.def(
        "shuffle_tags",
        [](std::vector<int> tags, std::uint64_t seed) {
            return tagmine::corpus::shuffle_tags(std::move(tags), seed);
        },
        py::arg("tags"), py::arg("seed"));

    m.def(
        "bce_loss",
        [](const Rows& labels, const Rows& probs) {
            auto r = tagmine::losskit::bce_loss(to_matrix(labels, "labels"),
                                                to_matrix(probs, "probs"));
            return py::make_tuple(r.loss, from_matrix(r.grad));
        },
        py::arg("labels"), py::arg("probs"));
    m.def(
        "asl_loss",
        [](const Rows& labels, const Rows& probs, double gamma_pos, double gamma_neg) {
            auto r = tagmine::losskit::asl_loss(to_matrix(labels, "labels"),
                                                to_matrix(probs, "probs"), gamma_pos,
                                                gamma_neg);
            return py::make_tuple(r.loss, from_matrix(r.grad));
        },
        py::arg("labels"), py::arg("probs"), py::arg("gamma_pos") = 0.0,
        py::arg("gamma_neg") = 4.0);
    m.def(
        "lm_loss",
        [](const Rows& logits, const std::vector<int>& targets) {
            auto r = tagmine::losskit::lm_loss(to_matrix(logits, "logits"), targets);
            return py::make_tuple(r.loss, from_matrix(r.grad));
        },
        py::arg("logits"), py::arg("targets"));
    m.def(
        "itc_loss",
        [](const Rows& image, const Rows& text, double temperature) {
            auto r = tagmine::losskit::itc_loss(to_matrix(image, "image"),
                                                to_matrix(text, "text"), temperature);
            return py::make_tuple(r.loss, from_matrix(r.grad_image),
                                  from_matrix(r.grad_text));
        },
        py::arg("image"), py::arg("text"), py::arg("temperature") = 0.07);
    m.def(
        "itm_loss",
        [](const std::vector<double>& probs, const std::vector<int>& labels) {
            auto r = tagmine::losskit::itm_loss(probs, labels);
            return py::make_tuple(r.loss, r.grad);
        },
        py::arg("match_probs"), py::arg("labels"));
    m.def("hard_negative_sample", &tagmine::losskit::hard_negative_sample,
          py::arg("similarity_row"), py::arg("anchor"), py::arg("seed"));

    m.def(
        "average_precision",
        [](const std::vector<double>& scores, const std::vector<int>& truth) {
            auto ap = tagmine::evalkit::average_precision(scores, truth);
            return ap ? py::cast(*ap) : py::none().cast<py::object>();
        },
        py::arg("scores"), py::arg("truth"));
    m.def(
        "mean_ap",
        [](const Rows& scores, const std::vector<std::vector<int>>& truth) {
            tagmine::evalkit::ScoredPredictions preds;
            preds.scores = to_matrix(scores, "scores");
            preds.truth = truth;
            for (std::size_t i = 0; i < preds.scores.rows; ++i)
                preds.image_ids.push_back(std::to_string(i));
            return tagmine::evalkit::mean_ap(preds);
        },
        py::arg("scores"), py::arg("truth"));
    m.def(
        "prf_at_threshold",
        [](const Rows& scores, const std::vector<std::vector<int>>& truth,
           double threshold) {
            tagmine::evalkit::ScoredPredictions preds;
            preds.scores = to_matrix(scores, "scores");
            preds.truth = truth;
            for (std::size_t i = 0; i < preds.scores.rows; ++i)
                preds.image_ids.push_back(std::to_string(i));
            auto m2 = tagmine::evalkit::prf_at_threshold(preds, threshold);
            py::dict out;
            out["micro_precision"] = m2.micro_precision;
            out["micro_recall"] = m2.micro_recall;
            out["micro_f1"] = m2.micro_f1;
            out["macro_precision"] = m2.macro_precision;
            out["macro_recall"] = m2.macro_recall;
            out["macro_f1"] = m2.macro_f1;
            return out;
        },
        py::arg("scores"), py::arg("truth"), py::arg("threshold") = 0.5);

    m.def("threshold_tags", &tagmine::tagger::threshold_tags, py::arg("probs"),
          py::arg("threshold"));

    m.def(
        "recall_at_k",
        [](const std::vector<std::vector<std::string>>& ranked,
           const std::vector<std::vector<std::string>>& relevant, std::size_t k) {
            return tagmine::evalkit::recall_at_k(ranked, relevant, k);
        },
        py::arg("ranked_ids"), py::arg("relevant"), py::arg("k"));

    m.def(
        "combined_score",
        [](const std::vector<double>& query_embedding, const std::vector<int>& query_tags,
           const std::vector<double>& item_embedding, const std::vector<int>& item_tags,
           double alpha) {
            tagmine::rerank::Query query;
            query.embedding = query_embedding;
            query.tags.insert(query_tags.begin(), query_tags.end());
            tagmine::rerank::GalleryItem item;
            item.embedding = item_embedding;
            item.tags.insert(item_tags.begin(), item_tags.end());
            return tagmine::rerank::combined_score(query, item, alpha);
        },
        py::arg("query_embedding"), py::arg("query_tags"), py::arg("item_embedding"),
        py::arg("item_tags"), py::arg("alpha") = 0.8);

    using PyGallery =
        std::vector<std::tuple<std::string, std::vector<double>, std::vector<int>>>;
    auto to_gallery = [](const PyGallery& gallery) {
        std::vector<tagmine::rerank::GalleryItem> items;
        items.reserve(gallery.size());
        for (const auto& [id, embedding, tags] : gallery) {
            tagmine::rerank::GalleryItem item;
            item.id = id;
            item.embedding = embedding;
            item.tags.insert(tags.begin(), tags.end());
            items.push_back(std::move(item));
        }
        return items;
    };
    auto from_ranked = [](const tagmine::rerank::RankedList& ranked) {
        py::list out;
        for (const auto& r : ranked) out.append(py::make_tuple(r.id, r.score));
        return out;
    };
    m.def(
        "rerank",
        [to_gallery, from_ranked](const std::vector<double>& query_embedding,
                                  const std::vector<int>& query_tags,
                                  const PyGallery& gallery, double alpha,
                                  std::size_t top_k) {
            tagmine::rerank::Query query;
            query.embedding = query_embedding;
            query.tags.insert(query_tags.begin(), query_tags.end());
            return from_ranked(
                tagmine::rerank::rerank(query, to_gallery(gallery), alpha, top_k));
        },
        py::arg("query_embedding"), py::arg("query_tags"), py::arg("gallery"),
        py::arg("alpha") = 0.8, py::arg("top_k") = 10,
        "gallery items are (id, embedding, tags) tuples");
    m.def(
        "keyword_search",
        [to_gallery, from_ranked](const std::vector<int>& keywords,
                                  const PyGallery& gallery, std::size_t top_k) {
            std::set<int> keys(keywords.begin(), keywords.end());
            return from_ranked(
                tagmine::rerank::keyword_search(keys, to_gallery(gallery), top_k));
        },
        py::arg("keywords"), py::arg("gallery"), py::arg("top_k") = 10);
}
