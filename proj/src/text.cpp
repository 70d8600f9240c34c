#include "cotrap/text.hpp"

#include "cotrap/error.hpp"

#include <algorithm>
#include <cstdlib>

namespace cotrap {

Lines split_lines(std::string_view text) {
    Lines out;
    if (text.empty())
        return out;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < text.size()) {
                out.lines.emplace_back(text.substr(start));
                out.trailing_newline = false;
            } else {
                out.trailing_newline = true;
            }
            break;
        }
        out.lines.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return out;
}

std::string join_lines(const Lines& lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.lines.size(); ++i) {
        out += lines.lines[i];
        if (i + 1 < lines.lines.size() || lines.trailing_newline)
            out += '\n';
    }
    return out;
}

std::size_t count_lines(std::string_view text) {
    if (text.empty())
        return 0;
    std::size_t n = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
    if (text.back() != '\n')
        n += 1;
    return n;
}

bool is_valid_utf8(std::string_view text) {
    std::size_t i = 0;
    const auto* s = reinterpret_cast<const unsigned char*>(text.data());
    std::size_t n = text.size();
    while (i < n) {
        unsigned char c = s[i];
        std::size_t extra;
        std::uint32_t cp;
        if (c < 0x80) {
            i += 1;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            extra = 1;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            extra = 2;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            extra = 3;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + extra >= n)
            return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            unsigned char cc = s[i + k];
            if ((cc & 0xC0) != 0x80)
                return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        // Overlong encodings, surrogates, and out-of-range code points.
        if (extra == 1 && cp < 0x80)
            return false;
        if (extra == 2 && cp < 0x800)
            return false;
        if (extra == 3 && cp < 0x10000)
            return false;
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
            return false;
        i += extra + 1;
    }
    return true;
}

std::string_view leading_whitespace(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t'))
        ++i;
    return line.substr(0, i);
}

bool is_blank(std::string_view line) {
    return line.find_first_not_of(" \t\r\f\v") == std::string_view::npos;
}

std::string_view trim(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t\r\n\f\v");
    if (b == std::string_view::npos)
        return {};
    std::size_t e = s.find_last_not_of(" \t\r\n\f\v");
    return s.substr(b, e - b + 1);
}

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    if (a.size() < b.size())
        std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j)
        row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t prev = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t cur = row[j];
            std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, prev + cost});
            prev = cur;
        }
    }
    return row[b.size()];
}

double edit_similarity(std::string_view a, std::string_view b) {
    std::size_t m = std::max(a.size(), b.size());
    if (m == 0)
        return 1.0;
    return 1.0 - static_cast<double>(edit_distance(a, b)) / static_cast<double>(m);
}

std::int64_t ratio_pct_hundredths(std::int64_t numerator, std::int64_t denominator) {
    if (denominator <= 0)
        throw Error("ratio over a non-positive total");
    bool negative = numerator < 0;
    std::int64_t num = negative ? -numerator : numerator;
    // floor(num*10000/den + 1/2) == (num*20000 + den) / (2*den)
    std::int64_t hundredths = (num * 20000 + denominator) / (2 * denominator);
    return negative ? -hundredths : hundredths;
}

std::string format_hundredths(std::int64_t hundredths) {
    bool negative = hundredths < 0;
    std::int64_t v = negative ? -hundredths : hundredths;
    std::string out = negative ? "-" : "";
    out += std::to_string(v / 100);
    out += '.';
    std::int64_t frac = v % 100;
    out += static_cast<char>('0' + frac / 10);
    out += static_cast<char>('0' + frac % 10);
    return out;
}

double hundredths_to_double(std::int64_t hundredths) {
    return static_cast<double>(hundredths) / 100.0;
}

std::int64_t mean_hundredths(std::int64_t sum, std::int64_t n) {
    if (n <= 0)
        throw Error("mean over zero entries");
    bool negative = sum < 0;
    std::int64_t s = negative ? -sum : sum;
    std::int64_t hundredths = (s * 200 + n) / (2 * n);
    return negative ? -hundredths : hundredths;
}

} // namespace cotrap
