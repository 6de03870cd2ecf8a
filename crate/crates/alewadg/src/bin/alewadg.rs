fn main() {
    println!("alewadg");
}
