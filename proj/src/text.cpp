#include "nav/text.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>

#include "nav/error.hpp"

namespace nav {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::InvalidDate: return "InvalidDate";
    case ErrorCode::EmptyTitle: return "EmptyTitle";
    case ErrorCode::InvalidDocument: return "InvalidDocument";
    case ErrorCode::InvalidSize: return "InvalidSize";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::SpanOutOfBounds: return "SpanOutOfBounds";
    case ErrorCode::StageMismatch: return "StageMismatch";
    case ErrorCode::UnknownDocument: return "UnknownDocument";
    case ErrorCode::UnparseableReference: return "UnparseableReference";
    case ErrorCode::UnknownEndpoint: return "UnknownEndpoint";
    case ErrorCode::KindConstraintViolation: return "KindConstraintViolation";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoActiveModules: return "NoActiveModules";
    case ErrorCode::InvalidWeights: return "InvalidWeights";
    case ErrorCode::InsufficientClasses: return "InsufficientClasses";
    case ErrorCode::UnknownConcept: return "UnknownConcept";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
    case ErrorCode::Config: return "Config";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

namespace utf8 {

std::u32string decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    auto b0 = static_cast<unsigned char>(s[i]);
    char32_t cp = 0xFFFD;
    std::size_t len = 1;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
    }
    if (len > 1) {
      bool ok = i + len <= s.size();
      char32_t v = b0 & (0xFF >> (len + 1));
      for (std::size_t k = 1; ok && k < len; ++k) {
        auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xC0) != 0x80) ok = false;
        v = (v << 6) | (b & 0x3F);
      }
      if (ok) {
        cp = v;
      } else {
        len = 1;
      }
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : s) {
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (c >> 12)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (c >> 18)));
      out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

std::size_t length(std::string_view s) {
  std::size_t n = 0;
  for (char c : s) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string substr(std::string_view s, std::size_t start, std::size_t end) {
  auto cps = decode(s);
  end = std::min(end, cps.size());
  if (start >= end) return {};
  return encode(std::u32string_view(cps).substr(start, end - start));
}

}  // namespace utf8

bool is_space(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f' ||
         c == 0xA0 || c == 0x2028 || c == 0x2029 || (c >= 0x2000 && c <= 0x200A) || c == 0x3000;
}

bool is_digit(char32_t c) { return c >= '0' && c <= '9'; }

bool is_upper(char32_t c) {
  return (c >= 'A' && c <= 'Z') || (c >= 0xC0 && c <= 0xDE && c != 0xD7);
}

bool is_alnum(char32_t c) {
  if (c < 0x80) return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || is_digit(c);
  if (c < 0xC0) return false;               // Latin-1 punctuation and symbols
  if (c == 0xD7 || c == 0xF7) return false;  // multiplication, division
  if (c >= 0x2000 && c <= 0x206F) return false;
  if (c >= 0x3000 && c <= 0x303F) return false;
  if (c == 0xFFFD) return false;
  return true;
}

char32_t to_lower(char32_t c) {
  if (is_upper(c)) return c + 0x20;
  return c;
}

std::string to_lower(std::string_view s) {
  auto cps = utf8::decode(s);
  for (auto& c : cps) c = to_lower(c);
  return utf8::encode(cps);
}

std::string trim(std::string_view s) {
  auto cps = utf8::decode(s);
  std::size_t b = 0;
  std::size_t e = cps.size();
  while (b < e && is_space(cps[b])) ++b;
  while (e > b && is_space(cps[e - 1])) --e;
  return utf8::encode(std::u32string_view(cps).substr(b, e - b));
}

std::string collapse_whitespace(std::string_view s) {
  auto cps = utf8::decode(s);
  std::u32string out;
  bool pending = false;
  for (char32_t c : cps) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return utf8::encode(out);
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  auto cps = utf8::decode(text);
  std::size_t i = 0;
  while (i < cps.size()) {
    if (!is_alnum(cps[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::u32string word;
    while (j < cps.size() && is_alnum(cps[j])) {
      word.push_back(to_lower(cps[j]));
      ++j;
    }
    out.push_back({utf8::encode(word), i, j});
    i = j;
  }
  return out;
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize(text)) out.push_back(std::move(t.text));
  return out;
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + cost});
      diag = up;
    }
  }
  return row[b.size()];
}

double edit_similarity(std::string_view a, std::string_view b) {
  auto ua = utf8::decode(a);
  auto ub = utf8::decode(b);
  std::size_t m = std::max(ua.size(), ub.size());
  if (m == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(ua, ub)) / static_cast<double>(m);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool parse_date(std::string_view s, Date& out) {
  using namespace std::chrono;
  if (s.size() < 10) return false;
  if (s.size() > 10 && s[10] != 'T' && s[10] != ' ') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (!is_digit(static_cast<char32_t>(s[i]))) return false;
  }
  if (s[4] != '-' || s[7] != '-') return false;
  int y = std::stoi(std::string(s.substr(0, 4)));
  unsigned m = static_cast<unsigned>(std::stoi(std::string(s.substr(5, 2))));
  unsigned d = static_cast<unsigned>(std::stoi(std::string(s.substr(8, 2))));
  year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) return false;
  out = sys_days{ymd};
  return true;
}

std::string format_date(Date d) {
  std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_month(Date d) { return format_date(d).substr(0, 7); }

std::string format_timestamp(std::chrono::system_clock::time_point t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const hh_mm_ss hms{floor<seconds>(t - day)};
  char buf[16];
  std::snprintf(buf, sizeof buf, "T%02d:%02d:%02dZ", static_cast<int>(hms.hours().count()),
                static_cast<int>(hms.minutes().count()), static_cast<int>(hms.seconds().count()));
  return format_date(day) + buf;
}

Date today_utc() {
  return std::chrono::floor<std::chrono::days>(std::chrono::system_clock::now());
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace nav
