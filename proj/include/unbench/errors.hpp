#pragma once

#include <stdexcept>
#include <string>

namespace unbench {

/// Broad failure classes. The CLI maps them onto process exit codes.
enum class ErrorKind {
	config,          // invalid configuration or arguments
	data,            // malformed or inconsistent data
	shape,           // dimension mismatch between model and inputs
	numeric,         // non-finite values during an update
	diverged,        // training produced a non-finite loss
	infeasible,      // a forget request cannot be satisfied
	timing,          // non-positive durations handed to a metric
	io,              // file system failures
};

class Error : public std::runtime_error {
public:
	Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {
	}

	ErrorKind kind() const noexcept {
		return kind_;
	}

private:
	ErrorKind kind_;
};

class ConfigError : public Error {
public:
	explicit ConfigError(const std::string &what) : Error(ErrorKind::config, what) {
	}
};

class DataError : public Error {
public:
	explicit DataError(const std::string &what) : Error(ErrorKind::data, what) {
	}
};

class ShapeError : public Error {
public:
	explicit ShapeError(const std::string &what) : Error(ErrorKind::shape, what) {
	}
};

class NumericOverflowError : public Error {
public:
	explicit NumericOverflowError(const std::string &what) : Error(ErrorKind::numeric, what) {
	}
};

class TrainingDivergedError : public Error {
public:
	TrainingDivergedError(const std::string &what, int epoch, int batch)
	    : Error(ErrorKind::diverged, what), epoch_(epoch), batch_(batch) {
	}
	int epoch() const noexcept {
		return epoch_;
	}
	int batch() const noexcept {
		return batch_;
	}

private:
	int epoch_;
	int batch_;
};

class InfeasibleForgetRequest : public Error {
public:
	InfeasibleForgetRequest(const std::string &what, double closest_fraction)
	    : Error(ErrorKind::infeasible, what), closest_(closest_fraction) {
	}
	/// Achievable forget fraction nearest to the requested band (0 if nothing is eligible).
	double closest_fraction() const noexcept {
		return closest_;
	}

private:
	double closest_;
};

class TimingError : public Error {
public:
	explicit TimingError(const std::string &what) : Error(ErrorKind::timing, what) {
	}
};

class IoError : public Error {
public:
	explicit IoError(const std::string &what) : Error(ErrorKind::io, what) {
	}
};

} // namespace unbench
