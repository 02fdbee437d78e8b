#ifndef OSL_OSL_HPP
#define OSL_OSL_HPP

#include "osl/core.hpp"
#include "osl/linalg.hpp"
#include "osl/model.hpp"
#include "osl/basis.hpp"
#include "osl/plm.hpp"
#include "osl/logit.hpp"
#include "osl/losses.hpp"
#include "osl/solver.hpp"
#include "osl/nuisance.hpp"
#include "osl/orthogonalize.hpp"
#include "osl/diagnostics.hpp"
#include "osl/experiments.hpp"
#include "osl/io.hpp"

#endif
