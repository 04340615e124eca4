#pragma once

#include "mscat/continuum.hpp"
#include "mscat/core.hpp"
#include "mscat/discrete.hpp"
#include "mscat/greens.hpp"
#include "mscat/mesh.hpp"
#include "mscat/oracle.hpp"
#include "mscat/particle.hpp"
#include "mscat/scene_io.hpp"
