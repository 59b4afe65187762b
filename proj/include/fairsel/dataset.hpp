#pragma once

#include <Eigen/Dense>
#include <string>

#include "fairsel/distribution.hpp"

namespace fairsel {

struct Provenance {
  std::string source;
  long rows_read = 0;
  long rows_dropped = 0;
};

// Integer-coded tabular records over a discrete schema. Every code is in
// [0, cardinality) of its variable; row order equals input order.
struct Dataset {
  VariableSchema schema;
  Eigen::MatrixXi codes;  // rows x variables, schema order
  Provenance provenance;

  long rows() const { return static_cast<long>(codes.rows()); }
};

}  // namespace fairsel
