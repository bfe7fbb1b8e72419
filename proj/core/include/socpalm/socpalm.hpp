#pragma once

#include <socpalm/alm.hpp>
#include <socpalm/cone.hpp>
#include <socpalm/io.hpp>
#include <socpalm/krylov.hpp>
#include <socpalm/linsys.hpp>
#include <socpalm/problem.hpp>
#include <socpalm/problems.hpp>
#include <socpalm/ssn.hpp>
#include <socpalm/types.hpp>
