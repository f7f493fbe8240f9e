#pragma once

// Text form of a PulseProgram. See docs/sequence-language.md for the grammar.
//
//   pulse area=pi/2 phase=0
//   wait 1.2ms
//   repeat 1000 { pulse area=pi phase=0; wait 2ms; pulse area=pi phase=180; wait 2ms }
//   acquire echo

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ddsim/sequence.hpp"

namespace ddsim {

namespace text_detail {

enum class Tok { ident, number, equals, lbrace, rbrace, separator, star, slash, minus, end };

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  std::size_t line = 1;
  std::size_t column = 1;
  bool glued = false;  // no whitespace before this token
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      const std::size_t before = pos_;
      skip_blanks();
      Token t{Tok::end, {}, 0.0, line_, col_, before == pos_ && !out.empty()};
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      const char c = src_[pos_];
      if (c == '\n' || c == ';') {
        t.kind = Tok::separator;
        advance();
      } else if (c == '=' || c == '{' || c == '}' || c == '*' || c == '/' || c == '-') {
        t.kind = c == '=' ? Tok::equals
                 : c == '{' ? Tok::lbrace
                 : c == '}' ? Tok::rbrace
                 : c == '*' ? Tok::star
                 : c == '/' ? Tok::slash
                            : Tok::minus;
        advance();
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        t.kind = Tok::number;
        lex_number(t);
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Tok::ident;
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
          advance();
        t.text = std::string(src_.substr(start, pos_ - start));
      } else {
        throw ParseError(line_, col_, std::string("unexpected character '") + c + "'");
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_blanks() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r') {
        advance();
      } else {
        break;
      }
    }
  }

  void lex_number(Token& t) {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
      advance();
    // exponent, only when followed by a digit so "1e" cannot swallow a unit
    if (pos_ + 1 < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
      if (look < src_.size() && std::isdigit(static_cast<unsigned char>(src_[look]))) {
        while (pos_ < look) advance();
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
      }
    }
    t.text = std::string(src_.substr(start, pos_ - start));
    const auto* first = t.text.data();
    const auto* last = first + t.text.size();
    auto [ptr, ec] = std::from_chars(first, last, t.number);
    if (ec != std::errc() || ptr != last) throw ParseError(t.line, t.column, "malformed number '" + t.text + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

enum class Quantity { time, frequency, angle };

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  PulseProgram program() {
    PulseProgram p;
    p.events = block(false);
    return p;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }

  [[noreturn]] void fail(const Token& t, const std::string& what) const {
    throw ParseError(t.line, t.column, what);
  }

  const Token& expect(Tok kind, const char* what) {
    if (peek().kind != kind) fail(peek(), std::string("expected ") + what);
    return next();
  }

  std::vector<Event> block(bool in_braces) {
    std::vector<Event> events;
    while (true) {
      while (peek().kind == Tok::separator) next();
      const Token& t = peek();
      if (t.kind == Tok::end) {
        if (in_braces) fail(t, "unterminated repeat block, expected '}'");
        return events;
      }
      if (t.kind == Tok::rbrace) {
        if (!in_braces) fail(t, "unmatched '}'");
        next();
        return events;
      }
      events.push_back(statement());
      const Token& after = peek();
      if (after.kind != Tok::separator && after.kind != Tok::end && after.kind != Tok::rbrace)
        fail(after, "expected end of statement");
    }
  }

  Event statement() {
    const Token& kw = peek();
    if (kw.kind != Tok::ident) fail(kw, "expected a statement keyword");
    if (kw.text == "pulse") return pulse();
    if (kw.text == "wait") {
      next();
      return Wait{quantity(Quantity::time, "wait duration")};
    }
    if (kw.text == "repeat") return repeat();
    if (kw.text == "acquire") {
      next();
      if (peek().kind == Tok::ident) return Acquire{next().text};
      return Acquire{"echo"};
    }
    fail(kw, "unknown statement '" + kw.text + "'");
  }

  Event repeat() {
    next();
    const Token& n = expect(Tok::number, "repeat count");
    if (n.number < 1 || n.number != std::floor(n.number) || n.number > 1e15)
      fail(n, "repeat count must be a positive integer");
    expect(Tok::lbrace, "'{'");
    Repeat r{static_cast<std::size_t>(n.number), block(true)};
    return r;
  }

  Event pulse() {
    const Token& kw = next();
    std::optional<double> area, phase, rabi, duration;
    while (peek().kind == Tok::ident) {
      const Token& key = next();
      expect(Tok::equals, "'=' after pulse parameter");
      auto set = [&](std::optional<double>& slot, Quantity q) {
        if (slot) fail(key, "duplicate pulse parameter '" + key.text + "'");
        slot = quantity(q, key.text);
      };
      if (key.text == "area")
        set(area, Quantity::angle);
      else if (key.text == "phase")
        set(phase, Quantity::angle);
      else if (key.text == "rabi")
        set(rabi, Quantity::frequency);
      else if (key.text == "duration")
        set(duration, Quantity::time);
      else
        fail(key, "unknown pulse parameter '" + key.text + "'");
    }
    const double ph = phase.value_or(0.0);
    if (!rabi) {
      if (duration) fail(kw, "pulse duration given without rabi frequency");
      if (!area) fail(kw, "pulse needs area=... or rabi=... with duration=/area=");
      if (!(*area > 0.0)) fail(kw, "pulse area must be positive");
      return PulseEvent::hard(*area, ph);
    }
    if (!(*rabi > 0.0)) fail(kw, "rabi frequency must be positive");
    if (area && duration) fail(kw, "give either area or duration for a finite pulse, not both");
    if (!area && !duration) fail(kw, "finite pulse needs duration=... or area=...");
    const double dur = duration ? *duration : *area / (kTwoPi * *rabi);
    if (!(dur > 0.0)) fail(kw, "pulse duration must be positive");
    return PulseEvent::finite(*rabi, dur, ph);
  }

  // value := ['-'] factor {('*' | '/') factor} [unit]
  double quantity(Quantity q, const std::string& what) {
    const Token& start = peek();
    bool negative = false;
    if (peek().kind == Tok::minus) {
      negative = true;
      next();
    }
    bool has_pi = false;
    double v = factor(has_pi);
    while (peek().kind == Tok::star || peek().kind == Tok::slash) {
      const bool mul = next().kind == Tok::star;
      const Token& ft = peek();
      const double f = factor(has_pi);
      if (!mul && f == 0.0) fail(ft, "division by zero");
      v = mul ? v * f : v / f;
    }
    if (negative) v = -v;

    std::optional<std::string> unit;
    if (peek().kind == Tok::ident && (peek().glued || is_unit(peek().text))) unit = next().text;

    double scale = 1.0;
    switch (q) {
      case Quantity::time:
        if (!unit) fail(start, what + ": missing time unit (s, ms, us)");
        if (*unit == "s") scale = 1.0;
        else if (*unit == "ms") scale = 1e-3;
        else if (*unit == "us") scale = 1e-6;
        else if (*unit == "ns") scale = 1e-9;
        else fail(start, what + ": unknown time unit '" + *unit + "'");
        if (v < 0.0) fail(start, what + ": negative duration");
        break;
      case Quantity::frequency:
        if (!unit) fail(start, what + ": missing frequency unit (Hz, kHz, MHz)");
        if (*unit == "Hz") scale = 1.0;
        else if (*unit == "kHz") scale = 1e3;
        else if (*unit == "MHz") scale = 1e6;
        else fail(start, what + ": unknown frequency unit '" + *unit + "'");
        break;
      case Quantity::angle:
        if (unit) {
          if (*unit == "rad") scale = 1.0;
          else if (*unit == "deg") scale = std::numbers::pi / 180.0;
          else fail(start, what + ": unknown angle unit '" + *unit + "'");
        } else {
          // bare numbers are degrees; anything written with pi is radians
          scale = has_pi ? 1.0 : std::numbers::pi / 180.0;
        }
        break;
    }
    const double out = v * scale;
    if (!std::isfinite(out)) fail(start, what + ": value is not finite");
    return out;
  }

  double factor(bool& has_pi) {
    const Token& t = peek();
    if (t.kind == Tok::number) {
      next();
      return t.number;
    }
    if (t.kind == Tok::ident && t.text == "pi") {
      next();
      has_pi = true;
      return std::numbers::pi;
    }
    fail(t, "expected a number or 'pi'");
  }

  static bool is_unit(const std::string& s) {
    static const char* const units[] = {"s", "ms", "us", "ns", "Hz", "kHz", "MHz", "rad", "deg"};
    for (const char* u : units)
      if (s == u) return true;
    return false;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

inline std::string format_double(double v) {
  // 17 significant digits round-trips every double exactly
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

inline void serialize_body(const std::vector<Event>& events, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  for (const auto& e : events) {
    out += pad;
    if (const auto* p = std::get_if<PulseEvent>(&e.value)) {
      if (p->mode == PulseEvent::Mode::hard)
        out += "pulse area=" + format_double(p->area_rad) + "rad";
      else
        out += "pulse rabi=" + format_double(p->rabi_hz) + "Hz duration=" + format_double(p->duration_s) + "s";
      out += " phase=" + format_double(p->phase_rad) + "rad\n";
    } else if (const auto* w = std::get_if<Wait>(&e.value)) {
      out += "wait " + format_double(w->duration_s) + "s\n";
    } else if (const auto* r = std::get_if<Repeat>(&e.value)) {
      out += "repeat " + std::to_string(r->count) + " {\n";
      serialize_body(r->body, indent + 1, out);
      out += pad + "}\n";
    } else {
      out += "acquire " + std::get<Acquire>(e.value).label + "\n";
    }
  }
}

}  // namespace text_detail

/// Parses sequence-language source. Throws ParseError with line/column.
inline PulseProgram parse(std::string_view text) {
  text_detail::Lexer lexer(text);
  text_detail::Parser parser(lexer.run());
  return parser.program();
}

/// Canonical form: one statement per line, SI units, 17 significant digits.
inline std::string serialize(const PulseProgram& program) {
  std::string out;
  text_detail::serialize_body(program.events, 0, out);
  return out;
}

}  // namespace ddsim
