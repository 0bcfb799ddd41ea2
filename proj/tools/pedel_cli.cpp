#include <cstdio>
int main() { std::puts("pedel cli: placeholder"); return 0; }
