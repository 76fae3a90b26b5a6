#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace catkit {

// Item parameters of the two-parameter logistic model: discrimination a > 0,
// difficulty b on the logit scale.
struct ItemParams {
  double a = 1.0;
  double b = 0.0;
};

// One response event. `correct` is 0/1; (user_id, item_id) is unique within a
// dataset.
struct Interaction {
  int user_id = 0;
  int item_id = 0;
  int correct = 0;
};

// Where a user's data came from and how it may be used downstream.
enum class Role { UnbiasedTrain, UnbiasedVal, Biased, Test };

std::string role_name(Role r);
Role role_from_name(const std::string& s);

// Error taxonomy mirrored by the CLI exit codes: usage/config -> 2,
// data -> 3, numerical failure -> 4. Plain std::invalid_argument is treated
// as a usage error.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& m) : std::runtime_error(m) {}
};
struct DataError : std::runtime_error {
  explicit DataError(const std::string& m) : std::runtime_error(m) {}
};
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace catkit
