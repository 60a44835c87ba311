fn main() {
    // Placeholder while the library takes shape.
}
