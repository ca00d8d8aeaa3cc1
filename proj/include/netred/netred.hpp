#pragma once

#include "netred/balance.hpp"
#include "netred/error.hpp"
#include "netred/errors.hpp"
#include "netred/graph.hpp"
#include "netred/io.hpp"
#include "netred/matrix_equations.hpp"
#include "netred/pipeline.hpp"
#include "netred/reduction.hpp"
#include "netred/semistable.hpp"
