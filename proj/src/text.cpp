#include "clarion/text.hpp"

#include <charconv>
#include <sstream>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "clarion/errors.hpp"

namespace clarion::text {

namespace {

#include "stopwords_data.inc"

bool is_word_char(UChar32 c)
{
    if (u_isalnum(c)) {
        return true;
    }
    auto const type = u_charType(c);
    return type == U_NON_SPACING_MARK || type == U_COMBINING_SPACING_MARK
           || type == U_ENCLOSING_MARK;
}

bool is_apostrophe(UChar32 c) { return c == 0x27 || c == 0x2019 || c == 0x02BC; }

std::string to_utf8(icu::UnicodeString const &s)
{
    std::string out;
    s.toUTF8String(out);
    return out;
}

struct Segmenter {
    std::vector<Sentence> sentences;
    Sentence sentence;
    Chunk chunk;
    icu::UnicodeString token;
    bool token_has_digit = false;

    void flush_token()
    {
        if (token.isEmpty()) {
            return;
        }
        WordToken word;
        word.surface = to_utf8(token);
        icu::UnicodeString lower(token);
        lower.toLower(icu::Locale::getRoot());
        word.term = to_utf8(lower);
        word.has_digit = token_has_digit;
        chunk.push_back(std::move(word));
        token.remove();
        token_has_digit = false;
    }

    void flush_chunk()
    {
        flush_token();
        if (!chunk.empty()) {
            sentence.chunks.push_back(std::move(chunk));
            chunk.clear();
        }
    }

    void flush_sentence()
    {
        flush_chunk();
        if (!sentence.chunks.empty()) {
            sentences.push_back(std::move(sentence));
            sentence = Sentence{};
        }
    }
};

} // namespace

std::string normalize(std::string_view utf8)
{
    UErrorCode status = U_ZERO_ERROR;
    icu::Normalizer2 const *nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) {
        throw Error(std::string("ICU NFC normalizer unavailable: ") + u_errorName(status));
    }
    auto source = icu::UnicodeString::fromUTF8(
        icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    icu::UnicodeString normalized = nfc->normalize(source, status);
    if (U_FAILURE(status)) {
        throw Error(std::string("NFC normalization failed: ") + u_errorName(status));
    }
    icu::UnicodeString cleaned;
    for (int32_t i = 0; i < normalized.length();) {
        UChar32 c = normalized.char32At(i);
        i += U16_LENGTH(c);
        if (u_iscntrl(c)) {
            if (u_isUWhiteSpace(c)) {
                cleaned.append(static_cast<UChar32>(0x20));
            }
            continue;
        }
        cleaned.append(c);
    }
    return to_utf8(cleaned);
}

std::string to_lower(std::string_view utf8)
{
    auto s = icu::UnicodeString::fromUTF8(
        icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    s.toLower(icu::Locale::getRoot());
    return to_utf8(s);
}

bool starts_upper(std::string_view utf8)
{
    auto s = icu::UnicodeString::fromUTF8(
        icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    if (s.isEmpty()) {
        return false;
    }
    UChar32 c = s.char32At(0);
    return u_isupper(c) || u_istitle(c);
}

bool is_acronym(std::string_view utf8)
{
    auto s = icu::UnicodeString::fromUTF8(
        icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    if (s.countChar32() < 2) {
        return false;
    }
    icu::UnicodeString upper(s);
    upper.toUpper(icu::Locale::getRoot());
    icu::UnicodeString lower(s);
    lower.toLower(icu::Locale::getRoot());
    return upper == s && lower != s;
}

std::vector<Sentence> segment(std::string_view utf8)
{
    auto const text = icu::UnicodeString::fromUTF8(
        icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));

    std::vector<UChar32> cps;
    cps.reserve(static_cast<std::size_t>(text.length()));
    for (int32_t i = 0; i < text.length();) {
        UChar32 c = text.char32At(i);
        i += U16_LENGTH(c);
        cps.push_back(c);
    }

    Segmenter seg;
    for (std::size_t i = 0; i < cps.size(); ++i) {
        UChar32 const c = cps[i];
        UChar32 const prev = i > 0 ? cps[i - 1] : 0;
        UChar32 const next = i + 1 < cps.size() ? cps[i + 1] : 0;

        if (is_word_char(c)) {
            seg.token.append(c);
            seg.token_has_digit = seg.token_has_digit || u_isdigit(c);
            continue;
        }
        if (is_apostrophe(c) && !seg.token.isEmpty() && u_isalpha(prev) && u_isalpha(next)) {
            seg.token.append(static_cast<UChar32>(0x27));
            continue;
        }
        if ((c == '.' || c == ',') && !seg.token.isEmpty() && u_isdigit(prev) && u_isdigit(next)) {
            seg.token.append(c);
            continue;
        }
        if (u_hasBinaryProperty(c, UCHAR_S_TERM)) {
            seg.flush_sentence();
            continue;
        }
        if (u_isUWhiteSpace(c)) {
            seg.flush_token();
            continue;
        }
        if (u_charType(c) == U_DASH_PUNCTUATION && is_word_char(prev) && is_word_char(next)) {
            seg.flush_token();
            continue;
        }
        // Remaining punctuation and symbols break the phrase.
        seg.flush_chunk();
    }
    seg.flush_sentence();
    return std::move(seg.sentences);
}

std::vector<std::string> tokenize(std::string_view utf8)
{
    std::vector<std::string> out;
    for (auto const &sentence : segment(utf8)) {
        for (auto const &chunk : sentence.chunks) {
            for (auto const &word : chunk) {
                out.push_back(word.term);
            }
        }
    }
    return out;
}

std::unordered_set<std::string> const &stopwords()
{
    static std::unordered_set<std::string> const words = [] {
        std::unordered_set<std::string> set;
        std::istringstream in{std::string(kStopwordData)};
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line.front() == '#') {
                continue;
            }
            set.insert(line);
        }
        return set;
    }();
    return words;
}

int stopword_list_version()
{
    static int const version = [] {
        std::string_view data(kStopwordData);
        constexpr std::string_view marker = "# version: ";
        auto pos = data.find(marker);
        if (pos == std::string_view::npos) {
            return 0;
        }
        int v = 0;
        auto begin = data.data() + pos + marker.size();
        std::from_chars(begin, data.data() + data.size(), v);
        return v;
    }();
    return version;
}

} // namespace clarion::text
