#pragma once

#include <stdexcept>
#include <string>

namespace geoward {

// Error classes map onto CLI exit codes: invalid input -> 2,
// numerical failure -> 3, non-convergence -> 4.
class invalid_input_error : public std::runtime_error {
public:
    explicit invalid_input_error(const std::string& msg) : std::runtime_error(msg) {}
};

class format_error : public invalid_input_error {
public:
    explicit format_error(const std::string& msg) : invalid_input_error(msg) {}
};

class capacity_error : public invalid_input_error {
public:
    explicit capacity_error(const std::string& msg) : invalid_input_error(msg) {}
};

class numerical_failure_error : public std::runtime_error {
public:
    explicit numerical_failure_error(const std::string& msg) : std::runtime_error(msg) {}
};

class singular_matrix_error : public numerical_failure_error {
public:
    explicit singular_matrix_error(const std::string& msg) : numerical_failure_error(msg) {}
};

class degenerate_input_error : public invalid_input_error {
public:
    explicit degenerate_input_error(const std::string& msg) : invalid_input_error(msg) {}
};

class non_convergence_error : public std::runtime_error {
public:
    explicit non_convergence_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace geoward
