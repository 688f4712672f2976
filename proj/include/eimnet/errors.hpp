#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace eimnet {

/// Base class of every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An inverted block (or a rational denominator) is numerically singular at s.
class SingularAtS : public Error {
public:
    SingularAtS(std::complex<double> s, double condition);
    std::complex<double> s;
    double condition;
};

/// Eigenvector matrix too ill-conditioned to bi-orthonormalize.
class DefectiveMatrix : public Error {
public:
    explicit DefectiveMatrix(double condition);
    double condition;
    /// Set when raised while sweeping a frequency grid.
    double frequency_hz = -1.0;
};

/// Construction-time shape error in a TransferMatrix composition.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    NoConvergence(int iterations, double residual);
    int iterations;
    double residual;
};

class NewtonDiverged : public Error {
public:
    explicit NewtonDiverged(std::complex<double> last_iterate);
    std::complex<double> last_iterate;
};

class EigenTrackLost : public Error {
public:
    using Error::Error;
};

class NumericalBlowup : public Error {
public:
    NumericalBlowup(double time, int state_index);
    double time;
    int state_index;
};

class IllConditionedScan : public Error {
public:
    IllConditionedScan(double frequency_hz, double condition);
    double frequency_hz;
    double condition;
};

class AmplitudeZero : public Error {
public:
    using Error::Error;
};

/// Configuration/schema error; carries the key path and 1-based source line (0 if unknown).
class ConfigError : public Error {
public:
    ConfigError(std::string path, int line, const std::string& message);
    std::string path;
    int line;
};

}  // namespace eimnet
