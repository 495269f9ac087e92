#ifndef ADAPTMH_HPP
#define ADAPTMH_HPP

#include "adaptmh/core.hpp"
#include "adaptmh/linalg.hpp"
#include "adaptmh/dists.hpp"
#include "adaptmh/mixture.hpp"
#include "adaptmh/copula.hpp"
#include "adaptmh/targets.hpp"
#include "adaptmh/proposals.hpp"
#include "adaptmh/engine.hpp"
#include "adaptmh/diagnostics.hpp"
#include "adaptmh/experiment.hpp"

#endif  // ADAPTMH_HPP
