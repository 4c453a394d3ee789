// Acceptance suite: one criterion per invocation (1..9), or all when run
// without arguments. Prints one pass/fail line per criterion.
#include <cstdio>
int main(int, char**) { return 1; }
