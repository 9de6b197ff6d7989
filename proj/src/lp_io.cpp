#include "homot/lp_io.hpp"

#include "homot/errors.hpp"
#include "homot/format.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

namespace homot {

ExportFormat export_format_from_string(const std::string& s) {
  if (s == "mps") return ExportFormat::mps;
  if (s == "lp") return ExportFormat::lp_text;
  throw input_error("unknown export format '" + s + "' (want mps|lp)");
}

namespace {

std::string mangle(char prefix, int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%07d", prefix, index + 1);
  return buf;
}

// field1 at column 2, field2 at 5, field3 at 15, field4 at 25
void mps_line(std::string& out, const std::string& f1, const std::string& f2,
              const std::string& f3 = "", const std::string& f4 = "") {
  std::string line = " ";
  line += f1;
  while (line.size() < 4) line += ' ';
  line += f2;
  if (!f3.empty()) {
    while (line.size() < 14) line += ' ';
    line += f3;
    if (!f4.empty()) {
      while (line.size() < 24) line += ' ';
      line += f4;
    }
  }
  out += line;
  out += '\n';
}

ExportResult export_mps(const LPModel& m) {
  ExportResult res;
  std::string& t = res.text;
  t += "NAME          " + m.name + "\n";
  if (m.sense == ObjSense::maximize) t += "OBJSENSE\n    MAX\n";
  t += "ROWS\n";
  mps_line(t, "N", "COST");
  for (int i = 0; i < m.num_rows(); ++i) {
    const char* rel = m.rel(i) == Relation::eq ? "E" : m.rel(i) == Relation::le ? "L" : "G";
    mps_line(t, rel, mangle('R', i));
  }
  t += "COLUMNS\n";
  for (int j = 0; j < m.num_vars(); ++j) res.name_map += mangle('C', j) + " " + m.var_name(j) + "\n";
  for (int i = 0; i < m.num_rows(); ++i) res.name_map += mangle('R', i) + " " + m.row_name(i) + "\n";
  // column-major entry lists
  std::vector<std::vector<std::pair<int, double>>> cols(m.num_vars());
  for (int i = 0; i < m.num_rows(); ++i)
    for (std::size_t k = m.row_begin(i); k < m.row_end(i); ++k)
      cols[m.entry_col(k)].emplace_back(i, m.entry_val(k));
  for (int j = 0; j < m.num_vars(); ++j) {
    std::string cname = mangle('C', j);
    if (m.obj(j) != 0.0) mps_line(t, "", cname, "COST", fmt_double(m.obj(j)));
    for (const auto& [i, v] : cols[j]) mps_line(t, "", cname, mangle('R', i), fmt_double(v));
  }
  t += "RHS\n";
  for (int i = 0; i < m.num_rows(); ++i)
    if (m.rhs(i) != 0.0) mps_line(t, "", "RHS", mangle('R', i), fmt_double(m.rhs(i)));
  t += "BOUNDS\n";
  for (int j = 0; j < m.num_vars(); ++j) {
    double lb = m.lb(j), ub = m.ub(j);
    std::string cname = mangle('C', j);
    if (lb == 0.0 && ub == kInf) continue;
    if (lb == ub) {
      mps_line(t, "FX", "BND", cname, fmt_double(lb));
    } else if (!std::isfinite(lb) && !std::isfinite(ub)) {
      mps_line(t, "FR", "BND", cname);
    } else {
      if (!std::isfinite(lb)) mps_line(t, "MI", "BND", cname);
      else if (lb != 0.0) mps_line(t, "LO", "BND", cname, fmt_double(lb));
      if (std::isfinite(ub)) mps_line(t, "UP", "BND", cname, fmt_double(ub));
    }
  }
  t += "ENDATA\n";
  return res;
}

void append_terms(std::string& out, const std::vector<std::pair<std::string, double>>& terms) {
  std::string line;
  bool first = true;
  for (const auto& [name, coef] : terms) {
    std::string piece = (first ? (coef < 0.0 ? "- " : "") : (coef < 0.0 ? "- " : "+ ")) +
                        fmt_double(std::abs(coef)) + " " + name;
    first = false;
    if (!line.empty() && line.size() + piece.size() + 1 > 76) {
      out += line;
      out += "\n  ";
      line.clear();
    }
    if (!line.empty()) line += ' ';
    line += piece;
  }
  out += line;
}

ExportResult export_lp_text(const LPModel& m) {
  ExportResult res;
  std::string& t = res.text;
  t += "\\ " + m.name + "\n";
  t += m.sense == ObjSense::maximize ? "Maximize\n" : "Minimize\n";
  {
    std::vector<std::pair<std::string, double>> terms;
    for (int j = 0; j < m.num_vars(); ++j)
      if (m.obj(j) != 0.0) terms.emplace_back(m.var_name(j), m.obj(j));
    std::string body;
    append_terms(body, terms);
    t += " obj: " + body + "\n";
  }
  t += "Subject To\n";
  for (int i = 0; i < m.num_rows(); ++i) {
    std::vector<std::pair<std::string, double>> terms;
    for (std::size_t k = m.row_begin(i); k < m.row_end(i); ++k)
      terms.emplace_back(m.var_name(m.entry_col(k)), m.entry_val(k));
    std::string body;
    append_terms(body, terms);
    const char* rel = m.rel(i) == Relation::eq ? " = " : m.rel(i) == Relation::le ? " <= " : " >= ";
    t += " " + m.row_name(i) + ": " + body + rel + fmt_double(m.rhs(i)) + "\n";
  }
  t += "Bounds\n";
  // referenced variables with default bounds need no line; unreferenced ones
  // get one so that parsing recovers them
  std::vector<bool> referenced(m.num_vars(), false);
  for (int i = 0; i < m.num_rows(); ++i)
    for (std::size_t k = m.row_begin(i); k < m.row_end(i); ++k)
      referenced[m.entry_col(k)] = true;
  for (int j = 0; j < m.num_vars(); ++j)
    if (m.obj(j) != 0.0) referenced[j] = true;
  for (int j = 0; j < m.num_vars(); ++j) {
    double lb = m.lb(j), ub = m.ub(j);
    const std::string& name = m.var_name(j);
    if (lb == 0.0 && ub == kInf) {
      if (!referenced[j]) t += " " + name + " >= 0\n";
      continue;
    }
    if (lb == ub) {
      t += " " + name + " = " + fmt_double(lb) + "\n";
    } else if (!std::isfinite(lb) && !std::isfinite(ub)) {
      t += " " + name + " free\n";
    } else if (!std::isfinite(ub)) {
      t += " " + name + " >= " + fmt_double(lb) + "\n";
    } else if (!std::isfinite(lb)) {
      t += " -inf <= " + name + " <= " + fmt_double(ub) + "\n";
    } else {
      t += " " + fmt_double(lb) + " <= " + name + " <= " + fmt_double(ub) + "\n";
    }
  }
  t += "End\n";
  return res;
}

}  // namespace

ExportResult export_model(const LPModel& model, ExportFormat format) {
  return format == ExportFormat::mps ? export_mps(model) : export_lp_text(model);
}

namespace {

// --- LP-text parsing ---------------------------------------------------------

struct Token {
  enum Kind { name, number, op, colon, end } kind = end;
  std::string text;
  double value = 0.0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) { advance(); }

  const Token& peek() const { return tok_; }
  Token next() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '\\') {  // comment to end of line
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ >= text_.size()) {
      tok_ = {Token::end, "", 0.0};
      return;
    }
    char c = text_[pos_];
    if (c == ':' ) {
      ++pos_;
      tok_ = {Token::colon, ":", 0.0};
      return;
    }
    if (c == '+' || c == '-' || c == '<' || c == '>' || c == '=') {
      std::string op(1, c);
      ++pos_;
      if ((c == '<' || c == '>') && pos_ < text_.size() && text_[pos_] == '=') {
        op += '=';
        ++pos_;
      }
      tok_ = {Token::op, op, 0.0};
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
              text_[pos_] == 'e' || text_[pos_] == 'E' ||
              ((text_[pos_] == '+' || text_[pos_] == '-') &&
               (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E'))))
        ++pos_;
      double v = 0.0;
      auto r = std::from_chars(text_.data() + start, text_.data() + pos_, v);
      if (r.ec != std::errc()) throw input_error("lp parse: bad number");
      tok_ = {Token::number, text_.substr(start, pos_ - start), v};
      return;
    }
    // name: anything up to whitespace/operator/colon
    std::size_t start = pos_;
    while (pos_ < text_.size()) {
      char d = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(d)) || d == ':' || d == '+' || d == '-' ||
          d == '<' || d == '>' || d == '=')
        break;
      ++pos_;
    }
    tok_ = {Token::name, text_.substr(start, pos_ - start), 0.0};
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  Token tok_;
};

bool iequals(const std::string& a, const std::string& b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

LPModel parse_lp_text(const std::string& text) {
  Lexer lex(text);
  LPModel model;
  std::map<std::string, int> vars;
  auto var_id = [&](const std::string& name) {
    auto it = vars.find(name);
    if (it != vars.end()) return it->second;
    int id = model.add_variable(name);
    vars.emplace(name, id);
    return id;
  };

  // sense
  Token t = lex.next();
  if (t.kind != Token::name) throw input_error("lp parse: expected objective sense");
  if (iequals(t.text, "maximize") || iequals(t.text, "max"))
    model.sense = ObjSense::maximize;
  else if (iequals(t.text, "minimize") || iequals(t.text, "min"))
    model.sense = ObjSense::minimize;
  else
    throw input_error("lp parse: unknown sense '" + t.text + "'");

  // term list: returns when a relation op or section keyword is reached
  auto parse_terms = [&](std::vector<std::pair<int, double>>& terms,
                         std::string& stop_word) -> std::string {
    double sign = 1.0;
    bool have_coef = false;
    double coef = 1.0;
    for (;;) {
      const Token& p = lex.peek();
      if (p.kind == Token::end) return "";
      if (p.kind == Token::op) {
        if (p.text == "+" || p.text == "-") {
          if (have_coef) throw input_error("lp parse: dangling coefficient");
          sign *= p.text == "-" ? -1.0 : 1.0;
          lex.next();
          continue;
        }
        return lex.next().text;  // relation
      }
      if (p.kind == Token::number) {
        if (have_coef) throw input_error("lp parse: two numbers in a row");
        coef = p.value;
        have_coef = true;
        lex.next();
        continue;
      }
      if (p.kind == Token::name) {
        if (!have_coef && (iequals(p.text, "subject") || iequals(p.text, "st") ||
                           iequals(p.text, "bounds") || iequals(p.text, "end") ||
                           iequals(p.text, "such"))) {
          stop_word = p.text;
          lex.next();
          return "";
        }
        int id = var_id(p.text);
        terms.emplace_back(id, sign * coef);
        sign = 1.0;
        coef = 1.0;
        have_coef = false;
        lex.next();
        continue;
      }
      throw input_error("lp parse: unexpected token '" + p.text + "'");
    }
  };

  // objective: optional label
  std::vector<std::pair<int, double>> obj_terms;
  std::string stop;
  {
    // peek label
    Token first = lex.next();
    if (first.kind != Token::name) throw input_error("lp parse: expected objective");
    if (lex.peek().kind == Token::colon) {
      lex.next();
    } else {
      // no label: first token is part of the terms; reconstruct
      if (iequals(first.text, "subject") || iequals(first.text, "bounds")) {
        stop = first.text;
      } else {
        obj_terms.emplace_back(var_id(first.text), 1.0);
      }
    }
    if (stop.empty()) {
      std::string rel = parse_terms(obj_terms, stop);
      if (!rel.empty()) throw input_error("lp parse: relation in objective");
    }
  }
  std::map<int, double> obj_merged;
  for (auto [id, c] : obj_terms) obj_merged[id] += c;
  for (auto [id, c] : obj_merged) model.set_objective(id, c);

  // "Subject To" / "such that"
  if (iequals(stop, "subject") || iequals(stop, "such")) {
    lex.next();  // "to"/"that"
  } else if (!iequals(stop, "st")) {
    throw input_error("lp parse: expected 'Subject To'");
  }

  // constraints until Bounds/End
  int auto_row = 0;
  for (;;) {
    const Token& p = lex.peek();
    if (p.kind == Token::end) break;
    if (p.kind == Token::name && (iequals(p.text, "bounds") || iequals(p.text, "end"))) break;

    std::string row_name;
    Token first = lex.next();
    std::vector<std::pair<int, double>> terms;
    if (first.kind == Token::name && lex.peek().kind == Token::colon) {
      row_name = first.text;
      lex.next();
    } else {
      row_name = "row" + std::to_string(auto_row);
      if (first.kind == Token::name) terms.emplace_back(var_id(first.text), 1.0);
      else if (first.kind == Token::number) {
        // coefficient then name
        Token nm = lex.next();
        if (nm.kind != Token::name) throw input_error("lp parse: expected name after number");
        terms.emplace_back(var_id(nm.text), first.value);
      } else if (first.kind == Token::op && (first.text == "+" || first.text == "-")) {
        double sgn = first.text == "-" ? -1.0 : 1.0;
        Token nxt = lex.next();
        double coef = 1.0;
        if (nxt.kind == Token::number) {
          coef = nxt.value;
          nxt = lex.next();
        }
        if (nxt.kind != Token::name) throw input_error("lp parse: expected name");
        terms.emplace_back(var_id(nxt.text), sgn * coef);
      } else {
        throw input_error("lp parse: malformed constraint start");
      }
    }
    ++auto_row;
    std::string dummy;
    std::string rel = parse_terms(terms, dummy);
    if (rel.empty()) throw input_error("lp parse: constraint without relation");
    Token rhs_tok = lex.next();
    double sign = 1.0;
    if (rhs_tok.kind == Token::op && (rhs_tok.text == "-" || rhs_tok.text == "+")) {
      sign = rhs_tok.text == "-" ? -1.0 : 1.0;
      rhs_tok = lex.next();
    }
    if (rhs_tok.kind != Token::number) throw input_error("lp parse: expected rhs number");
    Relation r = rel == "=" ? Relation::eq : rel == "<=" ? Relation::le : Relation::ge;
    std::map<int, double> merged;
    for (auto [id, c] : terms) merged[id] += c;
    std::vector<std::pair<int, double>> entries(merged.begin(), merged.end());
    model.add_row(row_name, r, sign * rhs_tok.value, entries);
  }

  // bounds
  if (lex.peek().kind == Token::name && iequals(lex.peek().text, "bounds")) {
    lex.next();
    for (;;) {
      const Token& p = lex.peek();
      if (p.kind == Token::end) break;
      if (p.kind == Token::name && iequals(p.text, "end")) break;
      // forms: name free | name = v | name >= v | name <= v | a <= name <= b
      //        -inf <= name <= b
      double lo = 0.0;
      bool have_lo = false;
      Token t1 = lex.next();
      double sgn = 1.0;
      if (t1.kind == Token::op && (t1.text == "-" || t1.text == "+")) {
        sgn = t1.text == "-" ? -1.0 : 1.0;
        t1 = lex.next();
      }
      if (t1.kind == Token::number ||
          (t1.kind == Token::name && iequals(t1.text, "inf"))) {
        lo = t1.kind == Token::number ? sgn * t1.value
                                      : sgn * std::numeric_limits<double>::infinity();
        have_lo = true;
        Token le = lex.next();
        if (!(le.kind == Token::op && le.text == "<="))
          throw input_error("lp parse: expected '<=' in bound");
        t1 = lex.next();
      }
      if (t1.kind != Token::name) throw input_error("lp parse: expected variable in bound");
      int id = var_id(t1.text);
      const Token& nxt = lex.peek();
      if (!have_lo && nxt.kind == Token::name && iequals(nxt.text, "free")) {
        lex.next();
        model.set_bounds(id, -kInf, kInf);
        continue;
      }
      if (nxt.kind == Token::op && (nxt.text == "<=" || nxt.text == ">=" || nxt.text == "=")) {
        std::string op = lex.next().text;
        Token v = lex.next();
        double s2 = 1.0;
        if (v.kind == Token::op && (v.text == "-" || v.text == "+")) {
          s2 = v.text == "-" ? -1.0 : 1.0;
          v = lex.next();
        }
        double val;
        if (v.kind == Token::number) val = s2 * v.value;
        else if (v.kind == Token::name && iequals(v.text, "inf"))
          val = s2 * std::numeric_limits<double>::infinity();
        else
          throw input_error("lp parse: expected bound value");
        if (op == "=") model.set_bounds(id, val, val);
        else if (op == "<=")
          model.set_bounds(id, have_lo ? lo : model.lb(id), val);
        else
          model.set_bounds(id, val, model.ub(id));
      } else if (have_lo) {
        throw input_error("lp parse: dangling lower bound");
      } else {
        throw input_error("lp parse: malformed bound line");
      }
    }
  }
  return model;
}

}  // namespace homot
