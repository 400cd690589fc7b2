#pragma once

#include "bbe/core.hpp"
#include "bbe/field.hpp"
#include "bbe/quad_rules.hpp"
#include "bbe/equilibria.hpp"
#include "bbe/collision.hpp"
#include "bbe/quad.hpp"
#include "bbe/forms.hpp"
#include "bbe/norms.hpp"
#include "bbe/kernelspace.hpp"
#include "bbe/experiments.hpp"
