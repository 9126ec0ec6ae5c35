#pragma once

#include "conic/asymptotic_lab.hpp"
#include "conic/cone_model.hpp"
#include "conic/cross_section.hpp"
#include "conic/errors.hpp"
#include "conic/index_calculus.hpp"
#include "conic/parallel.hpp"
#include "conic/quadrature.hpp"
#include "conic/renormalization.hpp"
#include "conic/special_functions.hpp"
#include "conic/version.hpp"
#include "conic/zeta_det.hpp"
