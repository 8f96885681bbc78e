#include "lpvjump/io.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace lpvjump {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_polymatrix(std::ostream& os, const std::string& name, const PolyMatrix& pm) {
  const char* vars = "-";
  if (pm.vars().theta && pm.vars().rho) {
    vars = "tr";
  } else if (pm.vars().theta) {
    vars = "t";
  } else if (pm.vars().rho) {
    vars = "r";
  }
  os << "mat " << name << " " << pm.rows() << " " << pm.cols() << " vars " << vars << " deg "
     << pm.degree(Var::Theta) << " " << pm.degree(Var::Rho) << " sym " << (pm.symmetric() ? 1 : 0)
     << "\n";
  for (const auto& [m, c] : pm.terms()) {
    os << "coeff " << m.theta << " " << m.rho << "\n";
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      for (Eigen::Index j = 0; j < c.cols(); ++j) {
        os << (j ? " " : "") << format_double(c(i, j));
      }
      os << "\n";
    }
  }
  os << "endmat\n";
}

namespace {
[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error("polymatrix read: " + what);
}

std::string next_token(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) fail("unexpected end of input");
  return tok;
}

double next_double(std::istream& is) {
  double v;
  if (!(is >> v)) fail("expected a number");
  return v;
}

long next_long(std::istream& is) {
  long v;
  if (!(is >> v)) fail("expected an integer");
  return v;
}
}  // namespace

PolyMatrix read_polymatrix(std::istream& is, std::string& name) {
  name = next_token(is);
  const long rows = next_long(is);
  const long cols = next_long(is);
  if (rows < 0 || cols < 0 || rows > 4096 || cols > 4096) fail("bad dimensions");
  if (next_token(is) != "vars") fail("expected 'vars'");
  std::string vars = next_token(is);
  VarSet vs;
  if (vars == "t") {
    vs = VarSet::of_theta();
  } else if (vars == "r") {
    vs = VarSet::of_rho();
  } else if (vars == "tr") {
    vs = VarSet::both();
  } else if (vars != "-") {
    fail("bad vars token '" + vars + "'");
  }
  if (next_token(is) != "deg") fail("expected 'deg'");
  next_long(is);
  next_long(is);
  if (next_token(is) != "sym") fail("expected 'sym'");
  const bool sym = next_long(is) != 0;

  PolyMatrix pm(rows, cols, vs);
  for (;;) {
    std::string tok = next_token(is);
    if (tok == "endmat") break;
    if (tok != "coeff") fail("expected 'coeff' or 'endmat'");
    const long dt = next_long(is);
    const long dr = next_long(is);
    if (dt < 0 || dr < 0 || dt > 64 || dr > 64) fail("bad monomial degree");
    Eigen::MatrixXd c(rows, cols);
    for (long i = 0; i < rows; ++i) {
      for (long j = 0; j < cols; ++j) c(i, j) = next_double(is);
    }
    pm.add_term(Monomial{static_cast<int>(dt), static_cast<int>(dr)}, c);
  }
  if (sym) pm.mark_symmetric();
  return pm;
}

}  // namespace lpvjump
