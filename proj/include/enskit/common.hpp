#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace enskit {

/// Shape or dimension disagreement between tensors/layers.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Out-of-range or otherwise invalid argument values.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Index outside the valid range (labels, epochs).
class IndexError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Non-finite loss or gradient encountered; the run is aborted.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File format or filesystem failure.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {
inline std::string msg_concat(std::ostringstream& os) { return os.str(); }
}

} // namespace enskit

#define ENSKIT_THROW_IF(cond, exc_type, message)                     \
    do {                                                             \
        if (cond) {                                                  \
            std::ostringstream enskit_os_;                           \
            enskit_os_ << message;                                   \
            throw exc_type(enskit_os_.str());                        \
        }                                                            \
    } while (0)
