#pragma once

#include "lpvjump/model.hpp"

#include <string>

namespace lpvjump {

/// Everything a system-description file defines.
struct SystemDescription {
  LpvDelaySystem sys;
  JumpKernel kernel;
  DelayLaw delay;
  InitialHistory history;  // defaults to the zero history
  bool has_history{false};
};

struct DescParseError : std::runtime_error {
  int line{0};
  DescParseError(int line_, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
};

/// Parses the strict line-oriented description format:
///
///   n / nw / nu / nz <int>        dimensions (nu and nw may be 0)
///   box <lo> <hi>                 parameter interval
///   h <real>                      delay bound
///   matrix <name>                 one of A Ad B E C Cd D F, followed by
///     deg <k>                     degree-keyed coefficient blocks, each a
///     <rows x cols numbers>       dense matrix in row-major order
///   kernel                        followed by "deg <ktheta> <krho>" blocks
///     deg <kt> <kr>               with a single value each
///     <value>
///   delay <expression in r>
///   phi <n expressions in t>      optional initial history (whitespace-split)
///
/// '#' starts a comment; matrices with a zero dimension are omitted.
SystemDescription parse_description(const std::string& text);
SystemDescription load_description(const std::string& path);

}  // namespace lpvjump
