/* Solves a uniform channel through the C API and checks the linear profile. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "mscg.h"

#define N 48

static int fail(const char *what, MscgStatus s) {
    const char *msg = mscg_last_error_message();
    fprintf(stderr, "%s failed with status %d: %s\n", what, (int)s, msg ? msg : "(none)");
    return 1;
}

int main(void) {
    static double k[N * N], p[N * N];
    for (int i = 0; i < N * N; i++) k[i] = 2.0;

    MscgHierarchyOptions hopts = mscg_hierarchy_options_default();
    MscgProblem *problem = NULL;
    MscgStatus s = mscg_problem_new(N, N, 1.0, 1.0, k, N * N, 1.0, 0.0, false, &hopts, &problem);
    if (s != MSCG_STATUS_OK) return fail("mscg_problem_new", s);

    MscgSolveOptions sopts = mscg_solve_options_default();
    sopts.reduction = 1e20;
    MscgSolver *solver = NULL;
    s = mscg_solver_new(problem, MSCG_METHOD_RECURSIVE_MS, &sopts, &solver);
    if (s != MSCG_STATUS_OK) return fail("mscg_solver_new", s);
    mscg_problem_free(problem);

    size_t iterations = 0;
    s = mscg_solver_solve(solver, p, N * N, &iterations);
    if (s != MSCG_STATUS_OK) return fail("mscg_solver_solve", s);

    double worst = 0.0;
    for (int j = 0; j < N; j++)
        for (int i = 0; i < N; i++) {
            double e = fabs(p[j * N + i] - (1.0 - (i + 0.5) / N));
            if (e > worst) worst = e;
        }
    char *json = mscg_solver_report_json(solver);
    if (!json) return fail("mscg_solver_report_json", MSCG_STATUS_INTERNAL);
    printf("iterations %zu, max error %.3e\n", iterations, worst);
    mscg_string_free(json);

    s = mscg_problem_new(N, N, 1.0, 1.0, k, 3, 1.0, 0.0, false, NULL, &problem);
    if (s != MSCG_STATUS_DIMENSION_MISMATCH || problem != NULL) {
        fprintf(stderr, "length mismatch not reported\n");
        return 1;
    }
    mscg_solver_free(solver);
    return worst < 1e-9 ? 0 : 1;
}
