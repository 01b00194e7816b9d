#pragma once

#include "bdr/bootstrap.hpp"
#include "bdr/dependence.hpp"
#include "bdr/dgp.hpp"
#include "bdr/errors.hpp"
#include "bdr/functionals.hpp"
#include "bdr/gaussian.hpp"
#include "bdr/io.hpp"
#include "bdr/marginal.hpp"
#include "bdr/model.hpp"

namespace bdr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bdr
