#pragma once

#include "mqbqr/errors.hpp"
#include "mqbqr/types.hpp"
#include "mqbqr/csv.hpp"
#include "mqbqr/converter_model.hpp"
#include "mqbqr/formulas.hpp"
#include "mqbqr/simulator.hpp"
#include "mqbqr/small_signal.hpp"
#include "mqbqr/losses.hpp"
#include "mqbqr/control.hpp"
#include "mqbqr/closed_loop.hpp"
#include "mqbqr/pv.hpp"
#include "mqbqr/config.hpp"
