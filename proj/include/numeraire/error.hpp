#pragma once

#include <stdexcept>
#include <string>

namespace numeraire {

// Malformed input: bad market files, dimension mismatches, invalid configs.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical routine could not deliver a result at the requested accuracy.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The small market admits a classical arbitrage (no equivalent martingale measure).
class ArbitrageError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace numeraire
