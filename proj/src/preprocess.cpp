#include "cvemap/preprocess.hpp"

#include <algorithm>
#include <array>
#include <regex>

#include "cvemap/defaults.hpp"
#include "file_io.hpp"

namespace cvemap::preprocess {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word_byte(char c) {
    auto u = static_cast<unsigned char>(c);
    return (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || u >= 0x80;
}

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

struct Candidate {
    std::size_t begin;
    std::size_t end;
    Category category;
};

// Lower value wins when two candidates start at the same position with equal length.
int priority(Category category) {
    switch (category) {
        case Category::url: return 0;
        case Category::email: return 1;
        case Category::cve_id: return 2;
        case Category::filepath: return 3;
        case Category::domain: return 4;
        case Category::version: return 5;
        case Category::gazetteer: return 6;
    }
    return 7;
}

struct Pattern {
    Category category;
    std::regex regex;
    int group;
    bool trim_trailing_punct;
};

const std::vector<Pattern>& patterns() {
    static const std::vector<Pattern> kPatterns = [] {
        using std::regex_constants::ECMAScript;
        using std::regex_constants::icase;
        std::vector<Pattern> p;
        p.push_back({Category::url,
                     std::regex(R"(\b(?:(?:https?|ftp)://|www\.)[^\s<>"'`]+)", ECMAScript | icase), 0,
                     true});
        p.push_back({Category::email,
                     std::regex(R"([A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,})",
                                ECMAScript),
                     0, false});
        p.push_back({Category::cve_id, std::regex(R"(\bCVE-\d{4}-\d{4,}\b)", ECMAScript | icase), 0,
                     false});
        p.push_back({Category::filepath,
                     std::regex(R"(\b[A-Za-z]:\\[^\s"'<>|]+)", ECMAScript), 0, true});
        p.push_back({Category::filepath,
                     std::regex(R"((?:^|[\s"'(\[])(/[A-Za-z0-9_.~-]+(?:/[A-Za-z0-9_.~-]*)*))", ECMAScript),
                     1, true});
        p.push_back({Category::filepath,
                     std::regex(R"(\b[A-Za-z0-9_.~-]+(?:/[A-Za-z0-9_.~-]+)+\.[A-Za-z0-9]{1,6}\b)",
                                ECMAScript),
                     0, false});
        p.push_back({Category::domain,
                     std::regex(R"(\b(?:[a-z0-9](?:[a-z0-9-]{0,61}[a-z0-9])?\.)+)"
                                R"((?:com|net|org|io|gov|edu|mil|int|info|biz|co|us|uk|de|fr|cn|ru|jp|in|br|au|ca|nl|eu|ch|it|es|se|no|pl|kr|tw|me|tv|app|dev|cloud|xyz|site|online|tech)\b)",
                                ECMAScript | icase),
                     0, false});
        p.push_back({Category::version,
                     std::regex(R"(\b[vV]?\d+(?:\.(?:\d+|[xX]\b))+(?:[A-Za-z]+\d+)?(?:-[A-Za-z]+\d*)?)",
                                ECMAScript),
                     0, false});
        return p;
    }();
    return kPatterns;
}

void trim_trailing_punct(std::string_view text, std::size_t begin, std::size_t& end) {
    constexpr std::string_view kTrailing = ".,;:!?)]}'\"";
    while (end > begin && kTrailing.find(text[end - 1]) != std::string_view::npos) {
        --end;
    }
}

// Matches `phrase` (lowercase, single spaces) at `pos`; a phrase space matches any
// whitespace run. Returns the end offset or npos.
std::size_t match_phrase(std::string_view text, std::size_t pos, std::string_view phrase) {
    std::size_t i = pos;
    for (std::size_t j = 0; j < phrase.size(); ++j) {
        if (phrase[j] == ' ') {
            if (i >= text.size() || !is_space(text[i])) {
                return std::string_view::npos;
            }
            while (i < text.size() && is_space(text[i])) {
                ++i;
            }
            continue;
        }
        if (i >= text.size() || lower(text[i]) != phrase[j]) {
            return std::string_view::npos;
        }
        ++i;
    }
    return i;
}

void collect_gazetteer(std::string_view text, const Gazetteer& gazetteer, std::vector<Candidate>& out) {
    for (std::size_t pos = 0; pos < text.size(); ++pos) {
        if (is_space(text[pos])) {
            continue;
        }
        const bool left_ok = pos == 0 || !is_word_byte(text[pos - 1]) || !is_word_byte(text[pos]);
        if (!left_ok) {
            continue;
        }
        // phrases() is sorted longest first, so the first hit is the longest match.
        for (const auto& phrase : gazetteer.phrases()) {
            auto end = match_phrase(text, pos, phrase);
            if (end == std::string_view::npos) {
                continue;
            }
            const bool right_ok =
                end == text.size() || !is_word_byte(text[end]) || !is_word_byte(text[end - 1]);
            if (right_ok) {
                out.push_back({pos, end, Category::gazetteer});
                break;
            }
        }
    }
}

std::vector<Candidate> find_candidates(std::string_view text, const Gazetteer& gazetteer) {
    std::vector<Candidate> all;
    collect_gazetteer(text, gazetteer, all);
    const std::string owned(text);
    for (const auto& pattern : patterns()) {
        for (auto it = std::sregex_iterator(owned.begin(), owned.end(), pattern.regex);
             it != std::sregex_iterator(); ++it) {
            const auto& m = *it;
            auto begin = static_cast<std::size_t>(m.position(pattern.group));
            auto end = begin + static_cast<std::size_t>(m.length(pattern.group));
            if (pattern.trim_trailing_punct) {
                trim_trailing_punct(text, begin, end);
            }
            if (end > begin) {
                all.push_back({begin, end, pattern.category});
            }
        }
    }
    std::sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
        if (a.begin != b.begin) {
            return a.begin < b.begin;
        }
        if (a.end != b.end) {
            return a.end > b.end;
        }
        return priority(a.category) < priority(b.category);
    });
    std::vector<Candidate> chosen;
    std::size_t covered_until = 0;
    for (const auto& c : all) {
        if (chosen.empty() || c.begin >= covered_until) {
            chosen.push_back(c);
            covered_until = c.end;
        }
    }
    return chosen;
}

std::vector<std::string> parse_word_list(std::string_view text, bool lowercase) {
    std::vector<std::string> out;
    for (auto line : detail::split_lines(text)) {
        auto trimmed = detail::trim(line);
        if (trimmed.empty() || trimmed.front() == '#') {
            continue;
        }
        out.push_back(lowercase ? detail::to_lower_ascii(trimmed) : std::string(trimmed));
    }
    return out;
}

}  // namespace

std::string_view to_string(Category category) {
    switch (category) {
        case Category::gazetteer: return "gazetteer";
        case Category::url: return "url";
        case Category::email: return "email";
        case Category::domain: return "domain";
        case Category::cve_id: return "cve_id";
        case Category::version: return "version";
        case Category::filepath: return "filepath";
    }
    return "unknown";
}

Gazetteer::Gazetteer(std::vector<std::string> phrases) {
    for (auto& phrase : phrases) {
        auto normalized = detail::to_lower_ascii(normalize_whitespace(phrase));
        if (!normalized.empty()) {
            phrases_.push_back(std::move(normalized));
        }
    }
    std::sort(phrases_.begin(), phrases_.end(), [](const std::string& a, const std::string& b) {
        return a.size() != b.size() ? a.size() > b.size() : a < b;
    });
    phrases_.erase(std::unique(phrases_.begin(), phrases_.end()), phrases_.end());
}

Gazetteer Gazetteer::parse(std::string_view text) { return Gazetteer(parse_word_list(text, false)); }

Gazetteer Gazetteer::load(const std::filesystem::path& path) { return parse(detail::read_file(path)); }

const Gazetteer& Gazetteer::builtin() {
    static const Gazetteer kBuiltin = parse(defaults::gazetteer_txt());
    return kBuiltin;
}

StopwordList::StopwordList(std::vector<std::string> words) {
    for (auto& w : words) {
        words_.insert(detail::to_lower_ascii(w));
    }
}

StopwordList StopwordList::parse(std::string_view text) { return StopwordList(parse_word_list(text, true)); }

StopwordList StopwordList::load(const std::filesystem::path& path) { return parse(detail::read_file(path)); }

const StopwordList& StopwordList::builtin() {
    static const StopwordList kBuiltin = parse(defaults::stopwords_txt());
    return kBuiltin;
}

bool StopwordList::contains(std::string_view word) const { return words_.count(std::string(word)) > 0; }

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

CleanupReport cleanup(std::string_view text, const Gazetteer& gazetteer) {
    CleanupReport report;
    report.input = std::string(text);

    // origin[i] is the input offset of working[i]; separators inserted for a removed span
    // point at the span's first input byte.
    std::string working(text);
    std::vector<std::size_t> origin(working.size());
    for (std::size_t i = 0; i < origin.size(); ++i) {
        origin[i] = i;
    }

    constexpr int kMaxPasses = 16;
    for (int pass = 0; pass < kMaxPasses; ++pass) {
        auto chosen = find_candidates(working, gazetteer);
        if (chosen.empty()) {
            break;
        }
        std::string next;
        std::vector<std::size_t> next_origin;
        next.reserve(working.size());
        next_origin.reserve(working.size());
        std::size_t cursor = 0;
        for (const auto& c : chosen) {
            for (; cursor < c.begin; ++cursor) {
                next.push_back(working[cursor]);
                next_origin.push_back(origin[cursor]);
            }
            const std::size_t in_begin = origin[c.begin];
            const std::size_t in_end = origin[c.end - 1] + 1;
            report.removed.push_back(
                {in_begin, in_end, c.category, std::string(text.substr(in_begin, in_end - in_begin))});
            next.push_back(' ');
            next_origin.push_back(in_begin);
            cursor = c.end;
        }
        for (; cursor < working.size(); ++cursor) {
            next.push_back(working[cursor]);
            next_origin.push_back(origin[cursor]);
        }
        working = std::move(next);
        origin = std::move(next_origin);
    }

    std::sort(report.removed.begin(), report.removed.end(),
              [](const RemovedSpan& a, const RemovedSpan& b) { return a.begin < b.begin; });
    report.output = normalize_whitespace(working);
    return report;
}

std::vector<std::string> tokenize(std::string_view text, const StopwordList& stopwords) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            if (!stopwords.contains(current)) {
                tokens.push_back(current);
            }
            current.clear();
        }
    };
    for (char c : text) {
        if (is_word_byte(c)) {
            current.push_back(lower(c));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

namespace {

constexpr std::array<std::string_view, 28> kAbbreviations = {
    "e.g", "i.e", "etc", "vs", "inc", "corp", "ltd", "co", "mr", "mrs", "ms", "dr",
    "no", "nos", "approx", "fig", "al", "ver", "ref", "st", "jr", "sr", "dept", "est",
    "cf", "resp", "incl", "misc",
};

bool is_abbreviation(std::string_view word) {
    auto lowered = detail::to_lower_ascii(word);
    if (std::find(kAbbreviations.begin(), kAbbreviations.end(), lowered) != kAbbreviations.end()) {
        return true;
    }
    // Single initials such as "J." in "J. Smith".
    return word.size() == 1 && word[0] >= 'A' && word[0] <= 'Z';
}

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }

}  // namespace

std::vector<std::string> segment_sentences(std::string_view text) {
    std::vector<std::string> sentences;
    auto emit = [&](std::size_t begin, std::size_t end) {
        auto piece = detail::trim(text.substr(begin, end - begin));
        if (!piece.empty()) {
            sentences.emplace_back(piece);
        }
    };

    std::size_t start = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '\n') {
            std::size_t j = i + 1;
            while (j < text.size() && (text[j] == ' ' || text[j] == '\t' || text[j] == '\r')) {
                ++j;
            }
            if (j < text.size() && text[j] == '\n') {
                emit(start, i);
                start = j + 1;
                i = j + 1;
                continue;
            }
        }
        if (c == '.' || c == '!' || c == '?') {
            std::size_t end = i + 1;
            while (end < text.size() && std::string_view("\"')]").find(text[end]) != std::string_view::npos) {
                ++end;
            }
            std::size_t next = end;
            while (next < text.size() && is_space(text[next])) {
                ++next;
            }
            if (next > end && next < text.size() && is_upper(text[next])) {
                bool split = true;
                if (c == '.') {
                    std::size_t word_begin = i;
                    while (word_begin > start && !is_space(text[word_begin - 1])) {
                        --word_begin;
                    }
                    auto word = text.substr(word_begin, i - word_begin);
                    while (!word.empty() && std::string_view("\"'([").find(word.front()) != std::string_view::npos) {
                        word.remove_prefix(1);
                    }
                    split = !is_abbreviation(word);
                }
                if (split) {
                    emit(start, end);
                    start = next;
                    i = next;
                    continue;
                }
            }
        }
        ++i;
    }
    emit(start, text.size());
    return sentences;
}

}  // namespace cvemap::preprocess
