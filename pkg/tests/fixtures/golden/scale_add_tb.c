#include <stdio.h>
#include <stdint.h>

int32_t scale_add(int32_t a, int32_t b, int32_t x);

int main(void) {
    int failures = 0;
    {  /* case 0 */
        int32_t c0_a = 2;
        int32_t c0_b = 3;
        int32_t c0_x = 4;
        int32_t result = scale_add(c0_a, c0_b, c0_x);
        if (result != 11) {
            printf("case 0: expected 11, got %ld\n", (long)result);
            failures = failures + 1;
        }
    }
    {  /* case 1 */
        int32_t c1_a = 0;
        int32_t c1_b = 7;
        int32_t c1_x = 9;
        int32_t result = scale_add(c1_a, c1_b, c1_x);
        if (result != 7) {
            printf("case 1: expected 7, got %ld\n", (long)result);
            failures = failures + 1;
        }
    }
    {  /* case 2 */
        int32_t c2_a = -1;
        int32_t c2_b = 0;
        int32_t c2_x = 5;
        int32_t result = scale_add(c2_a, c2_b, c2_x);
        if (result != -5) {
            printf("case 2: expected -5, got %ld\n", (long)result);
            failures = failures + 1;
        }
    }
    if (failures != 0) {
        printf("%d case(s) failed\n", failures);
        return 1;
    }
    printf("all 3 case(s) passed\n");
    return 0;
}
