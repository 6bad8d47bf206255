#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace grouprobe {

using Eigen::MatrixXd;
using Eigen::VectorXd;
// Row-major feature storage: per-point rows are contiguous.
using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Error taxonomy maps onto CLI exit codes: config/schema -> 2, data -> 3,
// solver non-convergence -> 4, anything else -> 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& msg, double grad_norm)
      : std::runtime_error(msg), final_grad_norm(grad_norm) {}
  double final_grad_norm;
};

struct InternalError : std::runtime_error {
  explicit InternalError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class LogLevel { Off = 0, Error = 1, Warn = 2, Info = 3, Debug = 4 };

// Level comes from the GROUPROBE_LOG environment variable (off/error/warn/info/debug).
LogLevel log_level();
void log_msg(LogLevel level, const std::string& msg);

inline void log_error(const std::string& msg) { log_msg(LogLevel::Error, msg); }
inline void log_warn(const std::string& msg) { log_msg(LogLevel::Warn, msg); }
inline void log_info(const std::string& msg) { log_msg(LogLevel::Info, msg); }
inline void log_debug(const std::string& msg) { log_msg(LogLevel::Debug, msg); }

// Shortest round-trip decimal formatting; used everywhere a double is
// written to CSV/JSON so reruns are byte-identical.
std::string format_double(double value);

}  // namespace grouprobe
