#pragma once

#include <stdexcept>
#include <string>

namespace pvseq {

// An Up/Move/Swap application outside its admissible domain.
struct OperationDomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Recency is only defined for sequences with at least one pageview.
struct UndefinedRecencyError : std::domain_error {
  using std::domain_error::domain_error;
};

// State space or edge budget exceeds what this build can hold.
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pvseq
