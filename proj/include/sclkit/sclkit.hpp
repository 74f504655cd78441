#pragma once

#include "sclkit/core.hpp"
#include "sclkit/nuisance.hpp"
#include "sclkit/oracle.hpp"
#include "sclkit/pool.hpp"
#include "sclkit/scl.hpp"
#include "sclkit/weights.hpp"
