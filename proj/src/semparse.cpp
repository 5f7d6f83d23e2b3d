#include "tagmine/semparse.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "tagmine/errors.hpp"

namespace tagmine::semparse {

namespace {

using WordSet = std::unordered_set<std::string>;

const WordSet kArticles = {"a", "an", "the"};

const WordSet kCopulas = {"is", "are", "was", "were", "am", "be", "been", "being"};

// Auxiliaries and light verbs that never become action tags.
const WordSet kAuxiliaries = {"have", "has", "had", "do", "does", "did", "can",
                              "could", "will", "would", "may", "might", "must",
                              "shall", "should", "not"};

const WordSet kConjunctions = {"and", "or", "nor", "but"};

const WordSet kNumerals = {
    "zero",  "one",  "two",    "three",   "four",   "five",   "six",     "seven",
    "eight", "nine", "ten",    "eleven",  "twelve", "dozen",  "twenty",  "thirty",
    "forty", "fifty", "sixty", "seventy", "eighty", "ninety", "hundred", "thousand"};

const WordSet kDeterminers = {
    "this", "that", "these", "those", "his",  "her",   "its",   "their", "our",
    "my",   "your", "some",  "any",   "no",   "each",  "every", "all",   "both",
    "few",  "many", "much",  "most",  "other", "another", "such", "several"};

const WordSet kPronouns = {"he",    "she",  "it",    "they",    "we",  "you",
                           "i",     "him",  "them",  "us",      "me",  "who",
                           "whom",  "which", "what", "there",   "someone",
                           "something", "anything", "nothing", "everything"};

const WordSet kPrepositions = {
    "aboard", "about",  "above",   "across",     "after",   "against", "along",
    "amid",   "among",  "around",  "at",         "atop",    "before",  "behind",
    "below",  "beneath", "beside", "besides",    "between", "beyond",  "by",
    "down",   "during", "for",     "from",       "in",      "inside",  "into",
    "near",   "of",     "off",     "on",         "onto",    "out",     "outside",
    "over",   "past",   "through", "throughout", "to",      "toward",  "towards",
    "under",  "underneath", "up",  "upon",       "with",    "within",  "without"};

// Content verbs common in image captions; inflected forms are matched by stem.
const WordSet kVerbs = {
    "run",   "sit",   "stand", "walk",  "eat",   "drink", "play",  "hold",
    "ride",  "jump",  "fly",   "swim",  "look",  "watch", "wear",  "carry",
    "catch", "throw", "drive", "climb", "read",  "sleep", "hang",  "lean",
    "rest",  "pose",  "smile", "laugh", "talk",  "speak", "sing",  "dance",
    "cook",  "cut",   "feed",  "graze", "perch", "surf",  "ski",   "skate",
    "sail",  "race",  "chase", "pull",  "push",  "kick",  "hit",   "serve",
    "work",  "wait",  "cross", "pass",  "lie",   "lay",   "point", "reach",
    "stare", "gaze",  "grab",  "lift",  "wave",  "swing", "slide", "crawl",
    "rise",  "shine", "build"};

// Prenominal adjectives common in captions, plus material -en forms.
const WordSet kAdjectives = {
    "red",     "orange", "yellow", "green",  "blue",   "purple", "pink",
    "brown",   "black",  "white",  "gray",   "grey",   "golden", "silver",
    "dark",    "light",  "bright", "big",    "large",  "small",  "little",
    "tiny",    "huge",   "giant",  "tall",   "short",  "long",   "wide",
    "narrow",  "old",    "young",  "new",    "ancient", "modern", "wooden",
    "metal",   "plastic", "glass", "stone",  "brick",  "leather", "woolen",
    "furry",   "fluffy", "cute",   "pretty", "ugly",   "dirty",  "clean",
    "wet",     "dry",    "hot",    "cold",   "warm",   "cool",   "empty",
    "full",    "open",   "closed", "happy",  "sad",    "angry",  "busy",
    "quiet",   "loud",   "fresh",  "ripe",   "sunny",  "cloudy", "rainy",
    "snowy",   "windy",  "foggy",  "shiny",  "rusty",  "sandy",  "grassy",
    "rocky",   "steep",  "round",  "square", "flat",   "sharp",  "soft",
    "hard",    "heavy",  "thick",  "thin",   "deep",   "shallow", "high",
    "low",     "fast",   "slow",   "wild",   "calm",   "beautiful", "colorful",
    "crowded", "striped", "spotted", "fuzzy", "bald",  "blond",  "elderly",
    "quick",   "lazy",   "muddy",  "icy",    "fancy",  "tasty",  "healthy",
    "hairy",   "curly",  "dusty",  "noisy",  "juicy",  "lucky",  "silly",
    "sleepy",  "hungry", "thirsty", "messy", "tidy",   "cozy",   "misty",
    "salty",   "spicy",  "sticky", "wavy",   "grumpy", "fluffy", "shaggy"};

const std::vector<std::string> kAdjectiveSuffixes = {"ful", "ous",  "ish", "ive",
                                                     "less", "able", "ible"};

// Common nouns whose -ing/-ed endings are not verb inflections.
const WordSet kNotVerbInflections = {
    "building", "painting", "wedding",  "ceiling",  "morning",  "evening",
    "clothing", "lightning", "pudding", "herring",  "duckling", "dumpling",
    "railing",  "awning",   "string",   "spring",   "thing",    "king",
    "ring",     "wing",     "sibling",  "darling",  "bed",      "shed",
    "sled",     "seed",     "weed",     "reed",     "speed",    "breed",
    "bread",    "head",     "thread",   "united",   "red"};

// Nouns ending in -ly that must not be classified as adverbs.
const WordSet kNotAdverbs = {"family", "butterfly", "dragonfly", "firefly",
                             "jelly", "belly", "lily", "holly", "assembly"};

// Irregular plurals and plurale-tantum words (the latter map to themselves).
const std::unordered_map<std::string, std::string> kIrregularPlurals = {
    {"men", "man"},       {"women", "woman"},     {"children", "child"},
    {"people", "person"}, {"feet", "foot"},       {"teeth", "tooth"},
    {"mice", "mouse"},    {"geese", "goose"},     {"oxen", "ox"},
    {"wolves", "wolf"},   {"leaves", "leaf"},     {"knives", "knife"},
    {"loaves", "loaf"},   {"shelves", "shelf"},   {"scarves", "scarf"},
    {"calves", "calf"},   {"wives", "wife"},      {"lives", "life"},
    {"buses", "bus"},     {"gases", "gas"},       {"tomatoes", "tomato"},
    {"potatoes", "potato"}, {"heroes", "hero"},   {"clothes", "clothes"},
    {"pants", "pants"},   {"shorts", "shorts"},   {"jeans", "jeans"},
    {"scissors", "scissors"}, {"pajamas", "pajamas"}};

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_ascii_letter(unsigned char c) { return std::isalpha(c) != 0; }
bool is_ascii_digit(unsigned char c) { return std::isdigit(c) != 0; }

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

std::string to_lower_stripped(const std::string& token) {
    std::size_t begin = 0, end = token.size();
    auto strippable = [](unsigned char c) {
        return (c & 0x80) == 0 && !is_ascii_letter(c) && !is_ascii_digit(c);
    };
    while (begin < end && strippable(static_cast<unsigned char>(token[begin]))) ++begin;
    while (end > begin && strippable(static_cast<unsigned char>(token[end - 1]))) --end;
    std::string out;
    out.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        unsigned char c = static_cast<unsigned char>(token[i]);
        out.push_back((c & 0x80) ? token[i] : static_cast<char>(std::tolower(c)));
    }
    return out;
}

bool all_ascii_letters(const std::string& w) {
    return !w.empty() && std::all_of(w.begin(), w.end(), [](unsigned char c) {
        return is_ascii_letter(c);
    });
}

// Plural-noun rule table. Guards keep short words and -ss/-us/-is endings
// untouched ("bus", "grass", "tennis").
std::string singularize(const std::string& w) {
    auto irregular = kIrregularPlurals.find(w);
    if (irregular != kIrregularPlurals.end()) return irregular->second;
    if (!all_ascii_letters(w) || w.size() < 4) return w;
    if (ends_with(w, "ss") || ends_with(w, "us") || ends_with(w, "is")) return w;
    if (w.size() > 4 && ends_with(w, "ies")) return w.substr(0, w.size() - 3) + "y";
    if (ends_with(w, "sses") || ends_with(w, "shes") || ends_with(w, "ches") ||
        ends_with(w, "xes"))
        return w.substr(0, w.size() - 2);
    if (w.back() == 's') return w.substr(0, w.size() - 1);  // horses -> horse
    return w;
}

// Number of vowel-to-consonant transitions; short stems (measure 1) that end
// consonant-vowel-consonant had their final e dropped before inflection.
int measure(const std::string& stem) {
    int m = 0;
    bool in_vowel = false;
    for (char c : stem) {
        if (is_vowel(c)) {
            in_vowel = true;
        } else {
            if (in_vowel) ++m;
            in_vowel = false;
        }
    }
    return m;
}

// Verb-inflection rule table: -ing and -ed stripped, then the stem repaired by
// consonant undoubling or final-e restoration. The verb lexicon settles
// ambiguous repairs ("runn" -> "run", "serv" -> "serve"); outside the lexicon
// a short consonant-vowel-consonant stem restores the e ("rac" -> "race",
// but "cover" stays).
std::string strip_verb_suffix(const std::string& w) {
    if (!all_ascii_letters(w) || kNotVerbInflections.count(w)) return w;
    std::string stem;
    if (w.size() >= 6 && ends_with(w, "ing")) {
        stem = w.substr(0, w.size() - 3);
    } else if (w.size() >= 5 && ends_with(w, "ed")) {
        stem = w.substr(0, w.size() - 2);
    } else {
        return w;
    }
    if (stem.size() < 3) return w;
    if (kVerbs.count(stem)) return stem;
    if (kVerbs.count(stem + "e")) return stem + "e";
    std::size_t n = stem.size();
    bool doubled = stem[n - 1] == stem[n - 2] && !is_vowel(stem[n - 1]);
    if (doubled && kVerbs.count(stem.substr(0, n - 1))) return stem.substr(0, n - 1);
    if (doubled && stem[n - 1] != 'l' && stem[n - 1] != 's' && stem[n - 1] != 'z')
        return stem.substr(0, n - 1);
    bool cvc = n >= 3 && !is_vowel(stem[n - 1]) && is_vowel(stem[n - 2]) &&
               !is_vowel(stem[n - 3]) && stem[n - 1] != 'w' && stem[n - 1] != 'x' &&
               stem[n - 1] != 'y';
    if (cvc && measure(stem) == 1) return stem + "e";
    return stem;
}

std::string normalize_word(const std::string& w, bool singularize_nouns) {
    std::string out = strip_verb_suffix(w);
    if (singularize_nouns) out = singularize(out);
    return out;
}

// --- token classification ---------------------------------------------------

enum class TokenClass {
    kSkip,         // articles, numerals, determiners, pronouns, adverbs
    kCopula,       // hard boundary, never a relation; opens predicate context
    kAuxiliary,    // hard boundary, never a relation
    kConjunction,  // closes the current noun phrase
    kPreposition,  // relation candidate
    kVerb,         // relation candidate, takes priority over prepositions
    kAdjective,    // modifier of the current noun phrase
    kContent,      // noun by default
    kBoundary      // sentence punctuation
};

bool is_numeral_token(const std::string& w) {
    if (kNumerals.count(w)) return true;
    return !w.empty() && std::all_of(w.begin(), w.end(), [](unsigned char c) {
        return is_ascii_digit(c);
    });
}

bool is_adverb(const std::string& w) {
    return w.size() >= 5 && ends_with(w, "ly") && kNotAdverbs.count(w) == 0;
}

bool looks_adjectival(const std::string& w) {
    if (kAdjectives.count(w)) return true;
    for (const auto& suffix : kAdjectiveSuffixes)
        if (w.size() > suffix.size() + 2 && ends_with(w, suffix)) return true;
    return false;
}

bool has_verb_inflection(const std::string& w) {
    if (!all_ascii_letters(w) || kNotVerbInflections.count(w)) return false;
    return (w.size() >= 6 && ends_with(w, "ing")) || (w.size() >= 5 && ends_with(w, "ed"));
}

bool is_known_verb(const std::string& w) {
    if (kVerbs.count(w)) return true;
    std::string stem = strip_verb_suffix(w);
    if (stem != w && kVerbs.count(stem)) return true;
    // third-person forms fold through the plural rules: crosses -> cross
    if (w.back() == 's' && kVerbs.count(singularize(w))) return true;
    return false;
}

// Lexicon stem for a verb token: "running" -> "run", "crosses" -> "cross".
std::string verb_stem(const std::string& w) {
    if (kVerbs.count(w)) return w;
    std::string stem = strip_verb_suffix(w);
    if (stem != w) return stem;
    if (w.back() == 's') {
        std::string s = singularize(w);
        if (kVerbs.count(s)) return s;
    }
    return w;
}

// after_np_lead: the previous token opened a noun phrase (article, determiner,
// numeral or adjective), so a verb homograph reads as a noun ("a race car")
// and a participle as a prenominal modifier ("a running man").
TokenClass classify(const std::string& w, bool np_has_noun, bool after_np_lead) {
    if (w.empty()) return TokenClass::kBoundary;
    if (kArticles.count(w)) return TokenClass::kSkip;
    if (kCopulas.count(w)) return TokenClass::kCopula;
    if (kAuxiliaries.count(w)) return TokenClass::kAuxiliary;
    if (kConjunctions.count(w)) return TokenClass::kConjunction;
    if (w == "next") return TokenClass::kPreposition;  // "next to"
    if (kPrepositions.count(w)) return TokenClass::kPreposition;
    if (is_numeral_token(w) || kDeterminers.count(w) || kPronouns.count(w))
        return TokenClass::kSkip;
    if (is_adverb(w)) return TokenClass::kSkip;
    bool inflected = has_verb_inflection(w);
    if (is_known_verb(w)) {
        if (!after_np_lead) return TokenClass::kVerb;
        return inflected ? TokenClass::kAdjective : TokenClass::kContent;
    }
    if (inflected) return np_has_noun ? TokenClass::kVerb : TokenClass::kAdjective;
    if (looks_adjectival(w)) return TokenClass::kAdjective;
    return TokenClass::kContent;
}

// --- chunker ------------------------------------------------------------------

struct Chunker {
    ParseResult result;
    std::vector<std::string> np_modifiers;  // normalized modifier words
    std::vector<std::string> np_nouns;      // raw lowercase head words
    std::string pending_relation;           // normalized relation word
    std::string pending_subject;            // head the relation attaches to
    bool after_np_lead = false;
    bool predicate_context = false;  // between a copula and the next noun

    void add_head(const std::string& head) {
        if (std::find(result.heads.begin(), result.heads.end(), head) == result.heads.end())
            result.heads.push_back(head);
    }

    void close_np() {
        if (np_nouns.empty()) {
            // Adjectives after a copula predicate the previous head
            // ("the sky is blue").
            if (!np_modifiers.empty() && !result.heads.empty() && predicate_context &&
                pending_relation.empty()) {
                for (const auto& m : np_modifiers)
                    result.modifiers.emplace_back(m, result.heads.back());
                np_modifiers.clear();
                predicate_context = false;
            }
            return;
        }
        std::string head;
        for (std::size_t i = 0; i < np_nouns.size(); ++i) {
            if (!head.empty()) head.push_back(' ');
            head += (i + 1 == np_nouns.size()) ? singularize(np_nouns[i]) : np_nouns[i];
        }
        add_head(head);
        for (const auto& m : np_modifiers) result.modifiers.emplace_back(m, head);
        np_modifiers.clear();
        np_nouns.clear();
        predicate_context = false;
        if (!pending_relation.empty() && !pending_subject.empty() && pending_subject != head)
            result.relations.push_back({pending_subject, pending_relation, head});
        pending_relation.clear();
        pending_subject.clear();
    }

    void drop_pending() {
        pending_relation.clear();
        pending_subject.clear();
    }

    void open_relation(const std::string& word) {
        close_np();
        if (result.heads.empty()) return;       // dangling relation, dropped
        if (!pending_relation.empty()) return;  // first relation word wins
        pending_relation = word;
        pending_subject = result.heads.back();
    }

    void feed(const std::string& word) {
        TokenClass cls = classify(word, !np_nouns.empty(), after_np_lead);
        after_np_lead = false;
        switch (cls) {
            case TokenClass::kSkip:
                if (kArticles.count(word) || kDeterminers.count(word) ||
                    is_numeral_token(word)) {
                    if (!np_nouns.empty()) close_np();  // article opens a fresh phrase
                    after_np_lead = true;
                }
                break;
            case TokenClass::kBoundary:
                // Dangling modifiers outside a predicate carry across the
                // boundary ("a big, red dog").
                if (!np_nouns.empty() || np_modifiers.empty() || predicate_context)
                    close_np();
                drop_pending();
                break;
            case TokenClass::kCopula:
                close_np();
                drop_pending();
                predicate_context = true;
                break;
            case TokenClass::kAuxiliary:
                close_np();
                drop_pending();
                break;
            case TokenClass::kConjunction:
                if (!np_nouns.empty() || np_modifiers.empty() || predicate_context)
                    close_np();
                break;
            case TokenClass::kPreposition:
                open_relation(word);
                break;
            case TokenClass::kVerb:
                open_relation(verb_stem(word));
                break;
            case TokenClass::kAdjective:
                // attaches to this phrase's head at close ("basket full" keeps
                // head "basket" with modifier "full")
                np_modifiers.push_back(normalize_word(word, false));
                if (np_nouns.empty()) after_np_lead = true;
                break;
            case TokenClass::kContent:
                np_nouns.push_back(word);
                break;
        }
    }

    ParseResult finish() {
        close_np();
        return std::move(result);
    }
};

ParseResult parse_from_json(const nlohmann::json& obj, const std::string& where) {
    ParseResult parse;
    if (!obj.contains("heads") || !obj["heads"].is_array())
        throw DataError(where + ": missing \"heads\" array");
    for (const auto& h : obj["heads"]) {
        if (!h.is_string()) throw DataError(where + ": non-string head");
        parse.heads.push_back(h.get<std::string>());
    }
    auto has_head = [&](const std::string& h) {
        return std::find(parse.heads.begin(), parse.heads.end(), h) != parse.heads.end();
    };
    if (obj.contains("modifiers")) {
        if (!obj["modifiers"].is_array())
            throw DataError(where + ": \"modifiers\" not an array");
        for (const auto& m : obj["modifiers"]) {
            if (!m.is_array() || m.size() != 2 || !m[0].is_string() || !m[1].is_string())
                throw DataError(where + ": modifier entries must be [modifier, head]");
            if (!has_head(m[1].get<std::string>()))
                throw DataError(where + ": modifier attached to unknown head \"" +
                                m[1].get<std::string>() + "\"");
            parse.modifiers.emplace_back(m[0].get<std::string>(), m[1].get<std::string>());
        }
    }
    if (obj.contains("relations")) {
        if (!obj["relations"].is_array())
            throw DataError(where + ": \"relations\" not an array");
        for (const auto& r : obj["relations"]) {
            if (!r.is_array() || r.size() != 3 || !r[0].is_string() || !r[1].is_string() ||
                !r[2].is_string())
                throw DataError(where +
                                ": relation entries must be [subject, relation, object]");
            if (!has_head(r[0].get<std::string>()) || !has_head(r[2].get<std::string>()))
                throw DataError(where + ": relation endpoint not in heads");
            parse.relations.push_back(
                {r[0].get<std::string>(), r[1].get<std::string>(), r[2].get<std::string>()});
        }
    }
    return parse;
}

}  // namespace

std::string normalize_tag(const std::string& raw) {
    std::vector<std::string> words;
    std::string current;
    for (char c : raw + " ") {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            if (!current.empty()) {
                std::string w = to_lower_stripped(current);
                if (!w.empty()) words.push_back(w);
                current.clear();
            }
        } else {
            current.push_back(c);
        }
    }
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        bool last = (i + 1 == words.size());
        if (!out.empty()) out.push_back(' ');
        out += last ? normalize_word(words[i], true) : words[i];
    }
    return out;
}

ParseResult parse_caption(const std::string& text) {
    Chunker chunker;
    std::string token;
    auto flush = [&]() {
        if (token.empty()) return;
        std::string w = to_lower_stripped(token);
        token.clear();
        if (!w.empty()) chunker.feed(w);
    };
    for (char c : text) {
        unsigned char u = static_cast<unsigned char>(c);
        if (u == ' ' || u == '\t' || u == '\n' || u == '\r') {
            flush();
        } else if ((u & 0x80) == 0 && (c == ',' || c == '.' || c == ';' || c == ':' ||
                                       c == '!' || c == '?' || c == '(' || c == ')')) {
            flush();
            chunker.feed("");  // punctuation boundary
        } else {
            token.push_back(c);
        }
    }
    flush();
    return chunker.finish();
}

ParsedTags project_tags(const ParseResult& parse) {
    ParsedTags tags;
    auto push_unique = [](std::vector<std::string>& list, const std::string& value) {
        if (value.empty()) return;
        if (std::find(list.begin(), list.end(), value) == list.end()) list.push_back(value);
    };
    for (const auto& head : parse.heads) push_unique(tags.entities, normalize_tag(head));
    for (const auto& [modifier, head] : parse.modifiers)
        push_unique(tags.attributes, normalize_tag(modifier));
    for (const auto& rel : parse.relations) push_unique(tags.actions, normalize_tag(rel[1]));
    return tags;
}

SidecarIndex SidecarIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open sidecar file: " + path);
    SidecarIndex index;
    index.path_ = path;
    std::string line;
    std::size_t file_line = 0;
    for (; std::getline(in, line); ++file_line) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string where = path + ":" + std::to_string(file_line);
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object())
            throw DataError(where + ": malformed sidecar record");
        if (!obj.contains("line") || !obj["line"].is_number_unsigned())
            throw DataError(where + ": missing non-negative \"line\" key");
        std::size_t key = obj["line"].get<std::size_t>();
        index.parses_[key] = parse_from_json(obj, where);
    }
    return index;
}

const ParseResult& SidecarIndex::at(std::size_t line_number) const {
    auto it = parses_.find(line_number);
    if (it == parses_.end())
        throw DataError(path_ + ": no sidecar parse for corpus line " +
                        std::to_string(line_number));
    return it->second;
}

bool SidecarIndex::contains(std::size_t line_number) const {
    return parses_.count(line_number) != 0;
}

}  // namespace tagmine::semparse
