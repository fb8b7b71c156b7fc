#include "rkforge/tableau_io.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "rkforge/errors.hpp"

namespace rkforge {

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string entry(double value, const Rational* exact) {
  if (exact != nullptr && exact->to_double() == value) return exact->to_string();
  return format_number(value);
}

class TokenReader {
 public:
  explicit TokenReader(std::istream& is) : is_(is) {}

  std::string next() {
    std::string tok;
    if (!(*this >> tok)) throw error("tableau file truncated");
    return tok;
  }

  bool operator>>(std::string& tok) {
    while (true) {
      if (pos_ >= line_.size()) {
        if (!std::getline(is_, line_)) return false;
        auto hash = line_.find('#');
        if (hash != std::string::npos) line_.erase(hash);
        pos_ = 0;
      }
      while (pos_ < line_.size() && std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
      if (pos_ >= line_.size()) continue;
      std::size_t start = pos_;
      while (pos_ < line_.size() && !std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
      tok = line_.substr(start, pos_ - start);
      return true;
    }
  }

  double number() {
    const std::string tok = next();
    if (tok.find('/') != std::string::npos) return Rational::parse(tok).to_double();
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw error("malformed number in tableau file: " + tok);
    return v;
  }

  long integer() {
    const std::string tok = next();
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (end != tok.c_str() + tok.size()) throw error("malformed integer in tableau file: " + tok);
    return v;
  }

  void expect(const std::string& field) {
    const std::string tok = next();
    if (tok != field) throw error("expected field '" + field + "', found '" + tok + "'");
  }

 private:
  std::istream& is_;
  std::string line_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_tableau(std::ostream& os, const ContinuousPair& pair) {
  const ButcherTableau& tb = pair.tableau;
  const RationalTableau* ex = pair.exact.get();
  os << "# rkforge tableau file\n";
  os << "s " << tb.s << "\n";
  os << "u " << tb.fsal_stage << "\n";
  os << "c\n";
  for (int j = 0; j < tb.s; ++j) {
    os << (j ? " " : "") << entry(tb.c(j), ex ? &ex->c[j] : nullptr);
  }
  os << "\nA\n";
  for (int i = 0; i < tb.s; ++i) {
    for (int j = 0; j < tb.s; ++j) {
      os << (j ? " " : "") << entry(tb.A(i, j), ex ? &ex->A[i][j] : nullptr);
    }
    os << "\n";
  }
  os << "b\n";
  for (int j = 0; j < tb.s; ++j) {
    os << (j ? " " : "") << entry(tb.b(j), ex ? &ex->b[j] : nullptr);
  }
  const int degree = pair.interpolant ? pair.interpolant->degree() : 0;
  os << "\nB " << degree << "\n";
  for (int k = 0; k < degree; ++k) {
    for (int j = 0; j < tb.s; ++j) {
      os << (j ? " " : "") << format_number(pair.interpolant->B(k, j));
    }
    os << "\n";
  }
  os << "d " << pair.d_basis.size() << "\n";
  for (std::size_t m = 0; m < pair.d_basis.size(); ++m) {
    const Rational* row = (ex && m < ex->d.size()) ? ex->d[m].data() : nullptr;
    for (int j = 0; j < tb.s; ++j) {
      os << (j ? " " : "") << entry(pair.d_basis[m](j), row ? &row[j] : nullptr);
    }
    os << "\n";
  }
}

void write_tableau_file(const std::string& path, const ContinuousPair& pair) {
  std::ofstream os(path);
  if (!os) throw error("cannot open for writing: " + path);
  write_tableau(os, pair);
  if (!os) throw error("write failed: " + path);
}

ContinuousPair read_tableau(std::istream& is) {
  TokenReader in(is);
  ContinuousPair pair;
  ButcherTableau& tb = pair.tableau;

  in.expect("s");
  tb.s = static_cast<int>(in.integer());
  if (tb.s < 1 || tb.s > 64) throw error("unreasonable stage count");
  in.expect("u");
  tb.fsal_stage = static_cast<int>(in.integer());
  if (tb.fsal_stage < 0 || tb.fsal_stage > tb.s) throw error("bad FSAL index");

  in.expect("c");
  tb.c.resize(tb.s);
  for (int j = 0; j < tb.s; ++j) tb.c(j) = in.number();
  in.expect("A");
  tb.A.resize(tb.s, tb.s);
  for (int i = 0; i < tb.s; ++i) {
    for (int j = 0; j < tb.s; ++j) tb.A(i, j) = in.number();
  }
  in.expect("b");
  tb.b.resize(tb.s);
  for (int j = 0; j < tb.s; ++j) tb.b(j) = in.number();

  in.expect("B");
  const int degree = static_cast<int>(in.integer());
  if (degree < 0 || degree > 16) throw error("bad interpolant degree");
  if (degree > 0) {
    Interpolant interp;
    interp.B.resize(degree, tb.s);
    for (int k = 0; k < degree; ++k) {
      for (int j = 0; j < tb.s; ++j) interp.B(k, j) = in.number();
    }
    pair.interpolant = std::move(interp);
  }

  in.expect("d");
  const int nd = static_cast<int>(in.integer());
  if (nd < 0 || nd > tb.s) throw error("bad difference-vector count");
  for (int m = 0; m < nd; ++m) {
    Eigen::VectorXd d(tb.s);
    for (int j = 0; j < tb.s; ++j) d(j) = in.number();
    pair.d_basis.push_back(std::move(d));
  }

  tb.validate(1e-9);

  // Orders are not stored; recover the high order from the weights.
  pair.order_low = pair.d_basis.empty() ? 0 : 4;
  pair.order_high = 0;
  for (int p = 1; p <= 7; ++p) {
    OrderReport rep = verify_order(tb, tb.b, p);
    if (rep.rows.back().max_abs_residual > 1e-9) break;
    pair.order_high = p;
  }
  return pair;
}

ContinuousPair read_tableau_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw error("cannot open tableau file: " + path);
  return read_tableau(is);
}

}  // namespace rkforge
