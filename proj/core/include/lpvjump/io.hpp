#pragma once

#include "lpvjump/polymat.hpp"

#include <iosfwd>
#include <string>

namespace lpvjump {

/// Round-trip-exact decimal formatting used by every text format.
std::string format_double(double v);

/// Writes "mat <name> <rows> <cols> vars <-|t|r|tr> deg <dt> <dr> sym <0|1>"
/// followed by one dense coefficient block per monomial and "endmat".
void write_polymatrix(std::ostream& os, const std::string& name, const PolyMatrix& pm);

/// Reads the block written by write_polymatrix; the "mat" keyword must have
/// been consumed already. Fills `name`.
PolyMatrix read_polymatrix(std::istream& is, std::string& name);

}  // namespace lpvjump
