#pragma once

#include <cctype>
#include <istream>
#include <string>
#include <string_view>

#include "kgx/dictionary.hpp"

namespace kgx {

namespace detail {

inline void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

class LineParser {
 public:
  LineParser(std::string_view line, std::size_t lineno) : s_(line), lineno_(lineno) {}

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
  }

  bool done() {
    skip_ws();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }

  Term term() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of line");
    char c = s_[pos_];
    if (c == '<') return Term::uri(iri());
    if (c == '"') return literal();
    if (c == '_') fail("blank nodes are not supported");
    fail(std::string("unexpected character '") + c + "'");
  }

  void dot() {
    skip_ws();
    if (pos_ >= s_.size() || s_[pos_] != '.') fail("expected '.'");
    ++pos_;
    if (!done()) fail("trailing characters after '.'");
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(lineno_, msg); }

 private:
  std::string iri() {
    ++pos_;  // '<'
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '>') {
      if (s_[pos_] == '\\') {
        out += escape();
      } else {
        out.push_back(s_[pos_++]);
      }
    }
    if (pos_ >= s_.size()) fail("unterminated IRI");
    ++pos_;  // '>'
    if (out.empty()) fail("empty IRI");
    return out;
  }

  // The literal is opaque: its lexical form is the raw source token including
  // quotes, escapes and any @lang / ^^<datatype> suffix. Escapes are still
  // validated.
  Term literal() {
    std::size_t start = pos_;
    ++pos_;  // opening quote
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\') {
        (void)escape();
      } else {
        ++pos_;
      }
    }
    if (pos_ >= s_.size()) fail("unterminated literal");
    ++pos_;
    if (pos_ < s_.size() && s_[pos_] == '@') {
      ++pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-')) ++pos_;
    } else if (s_.substr(pos_, 2) == "^^") {
      pos_ += 2;
      if (pos_ >= s_.size() || s_[pos_] != '<') fail("expected datatype IRI");
      (void)iri();
    }
    return Term::literal(std::string(s_.substr(start, pos_ - start)));
  }

  std::string escape() {
    ++pos_;  // backslash
    if (pos_ >= s_.size()) fail("dangling escape");
    char c = s_[pos_++];
    switch (c) {
      case 't': return "\t";
      case 'n': return "\n";
      case 'r': return "\r";
      case 'b': return "\b";
      case 'f': return "\f";
      case '"': return "\"";
      case '\'': return "'";
      case '\\': return "\\";
      case 'u': return unicode(4);
      case 'U': return unicode(8);
      default: fail(std::string("bad escape \\") + c);
    }
  }

  std::string unicode(std::size_t digits) {
    if (pos_ + digits > s_.size()) fail("truncated unicode escape");
    std::uint32_t cp = 0;
    for (std::size_t i = 0; i < digits; ++i) {
      char h = s_[pos_++];
      cp <<= 4;
      if (h >= '0' && h <= '9') cp |= static_cast<std::uint32_t>(h - '0');
      else if (h >= 'a' && h <= 'f') cp |= static_cast<std::uint32_t>(h - 'a' + 10);
      else if (h >= 'A' && h <= 'F') cp |= static_cast<std::uint32_t>(h - 'A' + 10);
      else fail("bad hex digit in unicode escape");
    }
    std::string out;
    append_utf8(out, cp);
    return out;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t lineno_;
};

}  // namespace detail

// Calls on_triple(subject, predicate, object) for every data line. Blank
// lines and '#' comments are skipped.
template <class OnTriple>
void parse_ntriples(std::istream& in, OnTriple&& on_triple) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::LineParser p(line, lineno);
    if (p.done()) continue;
    Term s = p.term();
    Term pr = p.term();
    Term o = p.term();
    p.dot();
    if (!s.is_uri()) p.fail("literal in subject position");
    if (!pr.is_uri()) p.fail("literal in predicate position");
    on_triple(std::move(s), std::move(pr), std::move(o));
  }
}

inline std::string format_term(const Term& t) {
  if (t.is_uri()) return "<" + t.lexical + ">";
  return t.lexical;
}

// Short display label: the local name of a URI, or the quoted content of a
// literal.
inline std::string term_label(const Term& t) {
  if (t.is_uri()) {
    auto cut = t.lexical.find_last_of("/#");
    if (cut == std::string::npos || cut + 1 >= t.lexical.size()) return t.lexical;
    return t.lexical.substr(cut + 1);
  }
  auto close = t.lexical.rfind('"');
  if (close == 0 || close == std::string::npos) return t.lexical;
  return t.lexical.substr(1, close - 1);
}

}  // namespace kgx
