fn main() {
    println!("terragait");
}
