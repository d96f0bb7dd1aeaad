#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "copert/simulation.hpp"

namespace copert::cli {

enum exit_code : int { ok = 0, usage_error = 2, estimation_failure = 3 };

// Runs the command line; output goes to `out` unless --output names a file.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Dataset CSV as written by `generate`: y plus z1..zd for toy settings, y, l, w1.. otherwise.
void write_dataset(std::ostream& out, const sim_data& data);

// Expands "<kind>:all" into one spec per coordinate.
std::vector<effect_spec> expand_effects(const std::vector<std::string>& texts, std::size_t d);

}  // namespace copert::cli
