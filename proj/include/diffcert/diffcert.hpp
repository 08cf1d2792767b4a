#pragma once

#include "diffcert/antiderivative.hpp"
#include "diffcert/bridge.hpp"
#include "diffcert/catalog.hpp"
#include "diffcert/certificate.hpp"
#include "diffcert/commands.hpp"
#include "diffcert/config.hpp"
#include "diffcert/divergence.hpp"
#include "diffcert/error.hpp"
#include "diffcert/expr.hpp"
#include "diffcert/feller.hpp"
#include "diffcert/optimize.hpp"
#include "diffcert/parallel.hpp"
#include "diffcert/philox.hpp"
#include "diffcert/quadrature.hpp"
#include "diffcert/simulate.hpp"
