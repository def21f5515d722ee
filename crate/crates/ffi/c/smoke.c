#include <stdio.h>
#include "singpert.h"

int main(void) {
    SpProblem *p = NULL;
    SpReport *r = NULL;
    if (sp_problem_builtin("wkb", &p) != SP_STATUS_OK) {
        fprintf(stderr, "%s\n", sp_last_error());
        return 2;
    }
    if (sp_run(p, false, &r) != SP_STATUS_OK) {
        fprintf(stderr, "%s\n", sp_last_error());
        sp_problem_free(p);
        return 2;
    }
    printf("singpert %s: %zu checks, %s\n", sp_version(), sp_report_check_count(r),
           sp_report_passed(r) ? "pass" : "fail");
    sp_report_free(r);
    sp_problem_free(p);
    return 0;
}
