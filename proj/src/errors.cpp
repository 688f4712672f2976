#include "eimnet/errors.hpp"

#include <sstream>

namespace eimnet {

namespace {
std::string fmt_complex(std::complex<double> z) {
    std::ostringstream os;
    os << z.real() << (z.imag() < 0 ? "-j" : "+j") << std::abs(z.imag());
    return os.str();
}
}  // namespace

SingularAtS::SingularAtS(std::complex<double> s_, double condition_)
    : Error("singular at s=" + fmt_complex(s_) + " (condition " + std::to_string(condition_) + ")"),
      s(s_), condition(condition_) {}

DefectiveMatrix::DefectiveMatrix(double condition_)
    : Error("eigenvector matrix near-defective (condition " + std::to_string(condition_) + ")"),
      condition(condition_) {}

NoConvergence::NoConvergence(int iterations_, double residual_)
    : Error("no convergence after " + std::to_string(iterations_) + " iterations (residual " +
            std::to_string(residual_) + ")"),
      iterations(iterations_), residual(residual_) {}

NewtonDiverged::NewtonDiverged(std::complex<double> last)
    : Error("mode Newton iteration diverged; last iterate s=" + fmt_complex(last)), last_iterate(last) {}

NumericalBlowup::NumericalBlowup(double time_, int state_index_)
    : Error("state " + std::to_string(state_index_) + " exceeded bound at t=" + std::to_string(time_)),
      time(time_), state_index(state_index_) {}

IllConditionedScan::IllConditionedScan(double frequency_hz_, double condition_)
    : Error("scan voltage matrix ill-conditioned at f=" + std::to_string(frequency_hz_) + " Hz (condition " +
            std::to_string(condition_) + ")"),
      frequency_hz(frequency_hz_), condition(condition_) {}

ConfigError::ConfigError(std::string path_, int line_, const std::string& message)
    : Error((line_ > 0 ? "line " + std::to_string(line_) + ": " : std::string()) + path_ + ": " + message),
      path(std::move(path_)), line(line_) {}

}  // namespace eimnet
