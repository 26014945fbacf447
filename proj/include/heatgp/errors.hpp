#pragma once

#include <stdexcept>
#include <string>

namespace heatgp {

// Error categories map 1:1 onto CLI exit codes (see exit_code()).
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class data_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class resource_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline int exit_code(const std::exception& e) {
    if (dynamic_cast<const config_error*>(&e)) return 2;
    if (dynamic_cast<const data_error*>(&e)) return 3;
    if (dynamic_cast<const numerical_error*>(&e)) return 4;
    if (dynamic_cast<const resource_error*>(&e)) return 5;
    return 1;
}

}  // namespace heatgp
