#include "lpvjump/desc.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

namespace lpvjump {

namespace {

struct Line {
  int number{0};
  std::vector<std::string> tokens;
};

std::vector<Line> tokenize(const std::string& text) {
  std::vector<Line> lines;
  std::istringstream is(text);
  std::string raw;
  int number = 0;
  while (std::getline(is, raw)) {
    ++number;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    Line line;
    line.number = number;
    std::string tok;
    while (ls >> tok) line.tokens.push_back(tok);
    if (!line.tokens.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

double parse_num(const std::string& tok, int line) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw DescParseError(line, "expected a number, got '" + tok + "'");
  }
  return v;
}

int parse_int(const std::string& tok, int line) {
  int v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw DescParseError(line, "expected an integer, got '" + tok + "'");
  }
  return v;
}

}  // namespace

SystemDescription parse_description(const std::string& text) {
  const std::vector<Line> lines = tokenize(text);
  std::size_t pos = 0;
  auto have = [&]() { return pos < lines.size(); };
  auto peek = [&]() -> const Line& { return lines[pos]; };

  std::optional<int> n, nw, nu, nz;
  std::optional<double> lo, hi, h;
  std::map<std::string, std::map<int, std::vector<double>>> matrices;  // name -> deg -> entries
  std::map<std::pair<int, int>, double> kernel_terms;
  std::optional<Expr> delay_expr;
  std::vector<Expr> phi_exprs;

  auto read_scalar_keyword = [&](const Line& line) -> bool {
    const auto& t = line.tokens;
    if (t[0] == "n" || t[0] == "nw" || t[0] == "nu" || t[0] == "nz") {
      if (t.size() != 2) throw DescParseError(line.number, t[0] + " takes one integer");
      int v = parse_int(t[1], line.number);
      if (t[0] == "n") {
        n = v;
      } else if (t[0] == "nw") {
        nw = v;
      } else if (t[0] == "nu") {
        nu = v;
      } else {
        nz = v;
      }
      return true;
    }
    if (t[0] == "box") {
      if (t.size() != 3) throw DescParseError(line.number, "box takes two numbers");
      lo = parse_num(t[1], line.number);
      hi = parse_num(t[2], line.number);
      return true;
    }
    if (t[0] == "h") {
      if (t.size() != 2) throw DescParseError(line.number, "h takes one number");
      h = parse_num(t[1], line.number);
      return true;
    }
    return false;
  };

  while (have()) {
    const Line& line = peek();
    const auto& t = line.tokens;
    if (read_scalar_keyword(line)) {
      ++pos;
      continue;
    }
    if (t[0] == "matrix") {
      if (t.size() != 2) throw DescParseError(line.number, "matrix takes a name");
      const std::string name = t[1];
      static const char* known[] = {"A", "Ad", "B", "E", "C", "Cd", "D", "F"};
      bool ok = false;
      for (const char* k : known) ok = ok || name == k;
      if (!ok) throw DescParseError(line.number, "unknown matrix '" + name + "'");
      if (matrices.count(name)) throw DescParseError(line.number, "matrix '" + name + "' repeated");
      ++pos;
      auto& blocks = matrices[name];
      while (have() && peek().tokens[0] == "deg") {
        const Line& dl = peek();
        if (dl.tokens.size() != 2) throw DescParseError(dl.number, "matrix deg takes one integer");
        int deg = parse_int(dl.tokens[1], dl.number);
        if (deg < 0 || deg > 8) throw DescParseError(dl.number, "degree out of range");
        if (blocks.count(deg)) throw DescParseError(dl.number, "degree block repeated");
        ++pos;
        std::vector<double> entries;
        while (have() && !peek().tokens.empty()) {
          const Line& el = peek();
          const std::string& first = el.tokens[0];
          if (first == "deg" || first == "matrix" || first == "kernel" || first == "delay" ||
              first == "phi" || first == "n" || first == "nw" || first == "nu" || first == "nz" ||
              first == "box" || first == "h") {
            break;
          }
          for (const auto& tok : el.tokens) entries.push_back(parse_num(tok, el.number));
          ++pos;
        }
        blocks[deg] = std::move(entries);
      }
      if (blocks.empty()) throw DescParseError(line.number, "matrix '" + name + "' has no blocks");
      continue;
    }
    if (t[0] == "kernel") {
      if (t.size() != 1) throw DescParseError(line.number, "kernel takes no arguments");
      ++pos;
      bool any = false;
      while (have() && peek().tokens[0] == "deg") {
        const Line& dl = peek();
        if (dl.tokens.size() != 3) {
          throw DescParseError(dl.number, "kernel deg takes theta and rho degrees");
        }
        int kt = parse_int(dl.tokens[1], dl.number);
        int kr = parse_int(dl.tokens[2], dl.number);
        if (kt < 0 || kr < 0 || kt > 8 || kr > 8) throw DescParseError(dl.number, "degree out of range");
        ++pos;
        if (!have() || peek().tokens.size() != 1) {
          throw DescParseError(dl.number, "kernel block needs a single value line");
        }
        kernel_terms[{kt, kr}] = parse_num(peek().tokens[0], peek().number);
        ++pos;
        any = true;
      }
      if (!any) throw DescParseError(line.number, "kernel has no blocks");
      continue;
    }
    if (t[0] == "delay") {
      if (t.size() < 2) throw DescParseError(line.number, "delay takes an expression");
      std::string expr_text;
      for (std::size_t i = 1; i < t.size(); ++i) expr_text += t[i];
      try {
        delay_expr = Expr::parse(expr_text);
      } catch (const ExprParseError& e) {
        throw DescParseError(line.number, std::string("delay expression: ") + e.what());
      }
      if (delay_expr->uses_t()) {
        throw DescParseError(line.number, "delay expressions may only use r");
      }
      ++pos;
      continue;
    }
    if (t[0] == "phi") {
      if (t.size() < 2) throw DescParseError(line.number, "phi takes one expression per state");
      for (std::size_t i = 1; i < t.size(); ++i) {
        try {
          phi_exprs.push_back(Expr::parse(t[i]));
        } catch (const ExprParseError& e) {
          throw DescParseError(line.number, std::string("phi expression: ") + e.what());
        }
        if (phi_exprs.back().uses_r()) {
          throw DescParseError(line.number, "phi expressions may only use t");
        }
      }
      ++pos;
      continue;
    }
    throw DescParseError(line.number, "unexpected keyword '" + t[0] + "'");
  }

  if (!n) throw DescParseError(0, "missing n");
  if (!nw) throw DescParseError(0, "missing nw");
  if (!nu) throw DescParseError(0, "missing nu");
  if (!nz) throw DescParseError(0, "missing nz");
  if (!lo || !hi) throw DescParseError(0, "missing box");
  if (!h) throw DescParseError(0, "missing h");
  if (!delay_expr) throw DescParseError(0, "missing delay");
  if (kernel_terms.empty()) throw DescParseError(0, "missing kernel");
  if (*n <= 0) throw DescParseError(0, "n must be positive");
  if (*nw < 0 || *nu < 0 || *nz < 0) throw DescParseError(0, "negative dimension");
  if (!(*lo < *hi)) throw DescParseError(0, "box requires lo < hi");
  if (*h < 0.0) throw DescParseError(0, "h must be nonnegative");

  SystemDescription out;
  out.sys.n = *n;
  out.sys.nw = *nw;
  out.sys.nu = *nu;
  out.sys.nz = *nz;
  out.sys.box = ParamBox(*lo, *hi);
  out.sys.h = *h;

  auto build_matrix = [&](const std::string& name, int rows, int cols) -> PolyMatrix {
    if (rows == 0 || cols == 0) {
      if (matrices.count(name)) {
        throw DescParseError(0, "matrix '" + name + "' given but its dimension is zero");
      }
      return PolyMatrix::zero(rows, cols, VarSet::of_rho());
    }
    auto it = matrices.find(name);
    if (it == matrices.end()) throw DescParseError(0, "missing matrix '" + name + "'");
    PolyMatrix pm(rows, cols, VarSet::of_rho());
    for (const auto& [deg, entries] : it->second) {
      if (static_cast<int>(entries.size()) != rows * cols) {
        throw DescParseError(0, "matrix '" + name + "' degree " + std::to_string(deg) + " has " +
                                    std::to_string(entries.size()) + " entries, expected " +
                                    std::to_string(rows * cols));
      }
      Eigen::MatrixXd c(rows, cols);
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) c(i, j) = entries[static_cast<std::size_t>(i * cols + j)];
      }
      if (!c.isZero(0.0)) pm.add_term(Monomial{0, deg}, c);
    }
    return pm;
  };

  out.sys.A = build_matrix("A", *n, *n);
  out.sys.Ad = build_matrix("Ad", *n, *n);
  out.sys.B = build_matrix("B", *n, *nu);
  out.sys.E = build_matrix("E", *n, *nw);
  out.sys.C = build_matrix("C", *nz, *n);
  out.sys.Cd = build_matrix("Cd", *nz, *n);
  out.sys.D = build_matrix("D", *nz, *nu);
  out.sys.F = build_matrix("F", *nz, *nw);

  PolyMatrix lambda(1, 1, VarSet::both());
  for (const auto& [deg, value] : kernel_terms) {
    if (value != 0.0) {
      lambda.add_term(Monomial{deg.first, deg.second},
                      Eigen::MatrixXd::Constant(1, 1, value));
    }
  }
  out.kernel = make_jump_kernel(lambda, out.sys.box);
  out.delay = make_delay_law(*delay_expr, *h);

  if (!phi_exprs.empty()) {
    if (static_cast<int>(phi_exprs.size()) != *n) {
      throw DescParseError(0, "phi needs exactly n expressions");
    }
    out.history = InitialHistory::from_exprs(phi_exprs);
    out.has_history = true;
  } else {
    out.history = InitialHistory::constant(Eigen::VectorXd::Zero(*n));
  }
  return out;
}

SystemDescription load_description(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_description: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_description(buf.str());
}

}  // namespace lpvjump
